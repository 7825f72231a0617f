use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

/// Attempts before giving up on a partition that leaves some client empty.
pub const PARTITION_RETRIES: usize = 100;

/// One `Dir(alpha, ..., alpha)` draw of length `m`, via normalised gammas.
fn dirichlet(alpha: f64, m: usize, rng: &mut impl Rng) -> Option<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).ok()?;
    let draws: Vec<f64> = (0..m).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    (total > 0.0 && total.is_finite()).then(|| draws.iter().map(|g| g / total).collect())
}

/// Integer counts summing to `n` that follow `props`, by largest remainder.
/// Remainder ties go to the lower index.
pub fn largest_remainder(props: &[f64], n: usize) -> Vec<usize> {
    let exact: Vec<f64> = props.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..props.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    // proportions summing slightly above one can overshoot
    let mut excess = assigned.saturating_sub(n);
    for &i in order.iter().rev() {
        while excess > 0 && counts[i] > 0 {
            counts[i] -= 1;
            excess -= 1;
        }
    }
    counts
}

/// Splits sample indices over `m` clients: for each class, proportions are
/// drawn from `Dir_m(alpha)` and that class's (shuffled) samples divided
/// accordingly. Draws that leave a client without data are repeated.
pub fn dirichlet_partition(
    labels: &[usize],
    classes: usize,
    alpha: f64,
    m: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<usize>>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config("fl.dirichlet_alpha", format!("{alpha} must be positive")));
    }
    if m == 0 {
        return Err(Error::config("clients", "need at least one client"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::EmptyData("every class needs at least one sample".into()));
    }
    for _ in 0..PARTITION_RETRIES {
        let mut shards: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut drawn = true;
        for members in &by_class {
            let Some(props) = dirichlet(alpha, m, rng) else {
                drawn = false;
                break;
            };
            let mut members = members.clone();
            members.shuffle(rng);
            let counts = largest_remainder(&props, members.len());
            let mut start = 0;
            for (shard, c) in shards.iter_mut().zip(counts) {
                shard.extend_from_slice(&members[start..start + c]);
                start += c;
            }
        }
        if drawn && shards.iter().all(|s| !s.is_empty()) {
            for s in &mut shards {
                s.sort_unstable();
            }
            return Ok(shards);
        }
    }
    Err(Error::PartitionRetries(PARTITION_RETRIES))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;

    fn balanced(classes: usize, per_class: usize) -> Vec<usize> {
        (0..classes * per_class).map(|i| i % classes).collect()
    }

    #[test]
    fn remainder_rounding() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.26, 0.37, 0.37], 10), vec![2, 4, 4]);
        assert_eq!(largest_remainder(&[1.0, 0.0], 7), vec![7, 0]);
    }

    #[test]
    fn huge_alpha_is_near_uniform() {
        let labels = balanced(10, 1000);
        let shards = dirichlet_partition(&labels, 10, 1e6, 10, &mut stream(3, Stream::Partition)).unwrap();
        for shard in &shards {
            for k in 0..10 {
                let share = shard.iter().filter(|&&i| labels[i] == k).count() as f64 / 1000.0;
                assert!((share - 0.1).abs() <= 0.02 * 0.1 + 1e-3, "class {k} share {share}");
            }
        }
    }

    #[test]
    fn small_alpha_is_skewed() {
        let labels = balanced(10, 200);
        for seed in 0..10 {
            let shards =
                dirichlet_partition(&labels, 10, 0.1, 10, &mut stream(seed, Stream::Partition)).unwrap();
            let most_skewed = shards
                .iter()
                .map(|s| {
                    let top = (0..10).map(|k| s.iter().filter(|&&i| labels[i] == k).count()).max().unwrap();
                    top as f64 / s.len() as f64
                })
                .fold(0.0, f64::max);
            assert!(most_skewed > 0.6, "seed {seed}: {most_skewed}");
        }
    }

    #[test]
    fn errors() {
        let mut rng = stream(0, Stream::Partition);
        assert!(dirichlet_partition(&[0, 1], 2, 0.0, 2, &mut rng).is_err());
        assert!(matches!(
            dirichlet_partition(&[0, 0], 2, 1.0, 2, &mut rng),
            Err(Error::EmptyData(_))
        ));
        // two samples cannot fill five clients
        assert!(matches!(
            dirichlet_partition(&[0, 1], 2, 1.0, 5, &mut rng),
            Err(Error::PartitionRetries(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn shards_are_disjoint_and_cover(seed in any::<u64>(), m in 1usize..8, alpha in 0.2f64..5.0) {
            let labels = balanced(4, 30);
            let shards = dirichlet_partition(&labels, 4, alpha, m, &mut stream(seed, Stream::Partition)).unwrap();
            let mut all: Vec<usize> = shards.concat();
            prop_assert_eq!(all.len(), labels.len());
            all.sort_unstable();
            prop_assert!(all.iter().enumerate().all(|(i, &x)| i == x));
            prop_assert!(shards.iter().all(|s| !s.is_empty()));
        }

        #[test]
        fn remainder_counts_sum(props in prop::collection::vec(0.0f64..1.0, 1..10), n in 0usize..500) {
            let total: f64 = props.iter().sum();
            prop_assume!(total > 0.0);
            let p: Vec<f64> = props.iter().map(|x| x / total).collect();
            let c = largest_remainder(&p, n);
            prop_assert_eq!(c.iter().sum::<usize>(), n);
            for (ci, pi) in c.iter().zip(&p) {
                prop_assert!((*ci as f64 - pi * n as f64).abs() < 1.0 + 1e-9);
            }
        }
    }
}
