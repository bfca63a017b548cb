use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    Zeros,
    IdentityLike,
    /// `U(-1/√fan_in, 1/√fan_in)` with `fan_in = rows`.
    UniformScaled,
}

/// Deterministic initialization from `(shape, seed, scheme)`.
pub fn seeded_init(rows: usize, cols: usize, seed: u64, scheme: InitScheme) -> Tensor2D {
    match scheme {
        InitScheme::Zeros => Tensor2D::zeros(rows, cols),
        InitScheme::IdentityLike => Tensor2D::identity_like(rows, cols),
        InitScheme::UniformScaled => {
            let bound = 1.0 / (rows.max(1) as f64).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Tensor2D::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schemes() {
        assert!(seeded_init(3, 4, 9, InitScheme::Zeros).data().iter().all(|&v| v == 0.0));
        let a = seeded_init(8, 5, 42, InitScheme::UniformScaled);
        let b = seeded_init(8, 5, 42, InitScheme::UniformScaled);
        assert_eq!(a.data(), b.data());
        let c = seeded_init(8, 5, 43, InitScheme::UniformScaled);
        assert!(a.data().iter().zip(c.data()).any(|(x, y)| x != y));
        let bound = 1.0 / 8f64.sqrt();
        assert!(a.data().iter().all(|v| v.abs() < bound));
        let i = seeded_init(3, 3, 0, InitScheme::IdentityLike);
        assert_eq!(i.get(1, 1), 1.0);
        assert_eq!(i.get(1, 2), 0.0);
    }
}
