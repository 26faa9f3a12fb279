//! Shared fixtures for the solver benchmarks.

use opnonloc_core::steering::assemblage_from;
use opnonloc_core::theories::{make_gbit, make_pr_bipartite, make_rebit, make_singlet};
use opnonloc_core::{Assemblage, Theory};

/// PR assemblage smeared to `(λ, μ)` on its two settings, with the gbit.
pub fn noisy_pr(lambda: f64, mu: f64) -> (Assemblage, Theory) {
    let asm = assemblage_from(&make_pr_bipartite(), &["X", "Z"])
        .and_then(|a| a.smeared("X", lambda))
        .and_then(|a| a.smeared("Z", mu))
        .expect("static assemblage");
    (asm, make_gbit())
}

/// Singlet assemblage on the X/Z settings, with the rebit.
pub fn singlet_xz() -> (Assemblage, Theory) {
    let asm = assemblage_from(&make_singlet(), &["X", "Z"]).expect("static assemblage");
    (asm, make_rebit())
}
