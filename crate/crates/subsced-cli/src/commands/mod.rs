pub mod certify;
pub mod design_weights;
pub mod fit;
pub mod simulate;
