pub mod chat;
pub mod derive_labels;
pub mod eval;
pub mod gen_data;
pub mod train_lm;
pub mod train_memory;
