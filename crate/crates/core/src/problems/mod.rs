//! Benchmark pencil generation and Matrix Market exchange.

mod matrix_market;
mod oscillator;

pub use matrix_market::{read_matrix_market, write_matrix_market};
pub use oscillator::{assemble_oscillator, Discretization, OscillatorSpec};
