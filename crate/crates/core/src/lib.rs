pub mod constraints;
pub mod enumerate;
pub mod fd;
pub mod io;
pub mod layout;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod problem;
pub mod reduction;
