//! Experimental designs on `[-1, 1]^k`.

use rand::seq::SliceRandom;
use rand::Rng;

/// Random Latin hypercube: each coordinate takes one point per stratum, jittered
/// uniformly inside it.
pub fn latin_hypercube<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; k]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..k {
        perm.shuffle(rng);
        for (i, &cell) in perm.iter().enumerate() {
            let u: f64 = rng.random_range(0.0..1.0);
            pts[i][j] = -1.0 + 2.0 * (cell as f64 + u) / n as f64;
        }
    }
    pts
}

/// Independent uniform points.
pub fn uniform_design<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_point_per_stratum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 17;
        let pts = latin_hypercube(&mut rng, n, 4);
        for j in 0..4 {
            let mut cells: Vec<usize> = pts
                .iter()
                .map(|p| (((p[j] + 1.0) / 2.0) * n as f64).floor() as usize)
                .collect();
            cells.sort_unstable();
            assert_eq!(cells, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn uniform_in_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = uniform_design(&mut rng, 50, 2);
        assert!(pts.iter().flatten().all(|v| (-1.0..1.0).contains(v)));
    }
}
