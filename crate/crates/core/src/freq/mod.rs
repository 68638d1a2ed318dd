//! Frequency-domain contrast perturbation and autoencoder harmonization.
//!
//! Spectra are kept DC-centered: coefficient `(W/2, H/2)` holds the image
//! sum. Radial positions are normalized so that the spectrum corners sit at
//! radius 1, which makes `radius <= 1` cover the whole matrix.

mod autoencoder;
mod spectrum;

pub use autoencoder::{
    ae_forward, ae_loss, harmonize_volume, train_harmonizer, AeGrads, HarmonizerModel, TrainConfig, TrainReport,
};
pub use spectrum::{
    fft2_centered, generate_variants, ifft2_centered, ifft2_complex, normalized_radius, perturb, perturb_tapered,
    variant_params, FrequencySlice, PerturbationConfig, Variant,
};
