pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod optimize;
pub mod scenarios;
pub mod shapecalc;
pub mod symbolic;
pub mod verify;
