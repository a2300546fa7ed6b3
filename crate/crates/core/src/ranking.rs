//! Plackett–Luce rankings of proposals and budgeted summary assembly.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Lower clamp applied to scores before they are used as weights.
pub const THETA_FLOOR: f64 = 1e-9;

/// Probability of `ranking` (position → item) under weights `theta`.
pub fn pl_probability(theta: &[f64], ranking: &[usize]) -> Result<f64> {
    if let Some(t) = theta.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::Domain(format!("Plackett-Luce weight {t} is not positive")));
    }
    check_permutation(ranking, theta.len())?;
    let mut rest: f64 = theta.iter().sum();
    let mut p = 1.0;
    for &i in ranking {
        p *= theta[i] / rest;
        rest -= theta[i];
    }
    Ok(p)
}

fn check_permutation(ranking: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if ranking.len() != n {
        return Err(Error::Domain(format!("ranking has {} items, expected {n}", ranking.len())));
    }
    for &i in ranking {
        if i >= n || seen[i] {
            return Err(Error::Domain(format!("ranking is not a permutation of 0..{n}")));
        }
        seen[i] = true;
    }
    Ok(())
}

pub fn clamp_theta(theta: &[f64]) -> Vec<f64> {
    theta.iter().map(|t| t.max(THETA_FLOOR)).collect()
}

/// Items sorted by decreasing key; equal keys keep index order.
fn argsort_desc(keys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    idx
}

/// Gumbel-perturbed argsort: `log θ_p − σ·log(−log U_p)`, descending.
/// `σ = 0` is a plain descending sort.
pub fn sample_ranking<R: Rng>(theta: &[f64], sigma: f64, rng: &mut R) -> Vec<usize> {
    let keys: Vec<f64> = clamp_theta(theta)
        .iter()
        .map(|t| {
            let g = if sigma > 0.0 {
                // U in (0, 1): gen::<f64>() is [0, 1), flip to (0, 1]
                let u: f64 = 1.0 - rng.gen::<f64>();
                let u = u.min(1.0 - f64::EPSILON / 2.0);
                -sigma * (-u.ln()).ln()
            } else {
                0.0
            };
            t.ln() + g
        })
        .collect();
    argsort_desc(&keys)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineRanking {
    ScoreDescending,
    Random,
}

pub fn baseline_ranking<R: Rng>(theta: &[f64], mode: BaselineRanking, rng: &mut R) -> Vec<usize> {
    match mode {
        BaselineRanking::ScoreDescending => argsort_desc(theta),
        BaselineRanking::Random => {
            let mut idx: Vec<usize> = (0..theta.len()).collect();
            idx.shuffle(rng);
            idx
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    /// Overshoot allowed for the top-ranked proposal only.
    pub tolerance: f64,
    /// Keep scanning past proposals that do not fit instead of stopping.
    pub skip_non_fitting: bool,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.1,
            skip_non_fitting: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub sample_index: usize,
    pub ranking: Vec<usize>,
    /// Chosen proposal indices in chronological order.
    pub chosen: Vec<usize>,
    pub durations: Vec<f64>,
    pub total: f64,
    pub budget: f64,
    pub over_budget: bool,
}

/// Greedy fill in rank order. The first proposal may exceed the budget by
/// the tolerance; every later one must fit in what is left. Assembly stops
/// at the first proposal that does not fit (or skips it when configured).
/// A first proposal beyond budget·(1 + tolerance) is kept alone and flagged.
pub fn assemble_summary(
    ranking: &[usize],
    durations: &[f64],
    starts: &[usize],
    budget: f64,
    cfg: AssemblyConfig,
) -> Result<CandidateSummary> {
    if !(budget > 0.0) {
        return Err(Error::Domain(format!("summary budget {budget} must be positive")));
    }
    check_permutation(ranking, durations.len())?;
    let mut chosen = Vec::new();
    let mut total = 0.0;
    let mut over_budget = false;
    for (pos, &p) in ranking.iter().enumerate() {
        let d = durations[p];
        if pos == 0 {
            chosen.push(p);
            total = d;
            if d > budget * (1.0 + cfg.tolerance) {
                over_budget = true;
                break;
            }
            continue;
        }
        if total + d <= budget {
            chosen.push(p);
            total += d;
        } else if !cfg.skip_non_fitting {
            break;
        }
    }
    chosen.sort_by_key(|&p| (starts[p], p));
    Ok(CandidateSummary {
        sample_index: 0,
        ranking: ranking.to_vec(),
        durations: chosen.iter().map(|&p| durations[p]).collect(),
        chosen,
        total,
        budget,
        over_budget,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub k: usize,
    pub sigma: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { k: 10, sigma: 0.05 }
    }
}

/// RNG of sample `index` for a given match. The stream depends on the
/// sample index, so sample `i` is drawn from the same stream family in
/// every match.
pub fn sample_stream(seed: u64, match_id: &str, index: usize) -> rng::Rng {
    rng::stream(seed, &["pl-sample", &index.to_string(), match_id])
}

/// `k` sampled rankings, each assembled into a candidate summary.
pub fn generate_candidates(
    theta: &[f64],
    durations: &[f64],
    starts: &[usize],
    budget: f64,
    sampling: SamplingConfig,
    assembly: AssemblyConfig,
    seed: u64,
    match_id: &str,
) -> Result<Vec<CandidateSummary>> {
    (0..sampling.k)
        .map(|i| {
            let ranking = sample_ranking(theta, sampling.sigma, &mut sample_stream(seed, match_id, i));
            let mut c = assemble_summary(&ranking, durations, starts, budget, assembly)?;
            c.sample_index = i;
            Ok(c)
        })
        .collect()
}

/// Index with the highest mean score across validation matches; the lowest
/// index wins ties. `scores[m][i]` is the score of sample `i` on match `m`.
pub fn select_best_candidate(scores: &[Vec<f64>], k: usize) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..k {
        let vals: Vec<f64> = scores.iter().filter_map(|s| s.get(i).copied()).collect();
        let mean = if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        if mean > best.1 {
            best = (i, mean);
        }
    }
    best.0
}

/// Checks the assembly contract on one candidate: within
/// budget·(1 + tolerance), stopped at the first non-fitting proposal of the
/// ranking, and chronological.
pub fn check_candidate(
    c: &CandidateSummary,
    durations: &[f64],
    starts: &[usize],
    cfg: AssemblyConfig,
) -> std::result::Result<(), String> {
    if c.total > c.budget * (1.0 + cfg.tolerance) + 1e-9 {
        return Err(format!("total {} exceeds budget {}", c.total, c.budget));
    }
    if c.chosen.windows(2).any(|w| starts[w[0]] > starts[w[1]]) {
        return Err("chosen clips not chronological".into());
    }
    let sum: f64 = c.chosen.iter().map(|&p| durations[p]).sum();
    if (sum - c.total).abs() > 1e-9 {
        return Err("total does not match chosen durations".into());
    }
    // the chosen set must be exactly a prefix of the ranking, and the next
    // ranked proposal must not fit
    let n = c.chosen.len();
    let mut prefix: Vec<usize> = c.ranking[..n.min(c.ranking.len())].to_vec();
    let mut chosen = c.chosen.clone();
    prefix.sort_unstable();
    chosen.sort_unstable();
    if !cfg.skip_non_fitting && prefix != chosen {
        return Err("chosen set is not a prefix of the ranking".into());
    }
    if !cfg.skip_non_fitting && !c.over_budget {
        if let Some(&next) = c.ranking.get(n) {
            if c.total + durations[next] <= c.budget {
                return Err(format!("proposal {next} still fits but was not added"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pl_examples() {
        assert!((pl_probability(&[2.0, 1.0], &[0, 1]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        for perm in [[0, 1, 2], [2, 1, 0], [1, 0, 2]] {
            assert!((pl_probability(&[0.3; 3], &perm).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        }
        assert!(pl_probability(&[1.0, 0.0], &[0, 1]).is_err());
        assert!(pl_probability(&[1.0, 2.0], &[0, 0]).is_err());
    }

    #[test]
    fn zero_noise_is_argsort() {
        let mut r = rng::stream(0, &[]);
        assert_eq!(sample_ranking(&[0.1, 0.9, 0.5], 0.0, &mut r), vec![1, 2, 0]);
        assert_eq!(sample_ranking(&[0.5, 0.5, 0.9], 0.0, &mut r), vec![2, 0, 1]);
        assert_eq!(
            baseline_ranking(&[0.1, 0.9, 0.5], BaselineRanking::ScoreDescending, &mut r),
            vec![1, 2, 0]
        );
    }

    #[test]
    fn greedy_stop_rule() {
        let starts = [0, 10, 20];
        let c = assemble_summary(&[0, 1, 2], &[60.0, 50.0, 30.0], &starts, 120.0, AssemblyConfig::default()).unwrap();
        assert_eq!(c.chosen, vec![0, 1]);
        assert_eq!(c.total, 110.0);
        check_candidate(&c, &[60.0, 50.0, 30.0], &starts, AssemblyConfig::default()).unwrap();

        let c = assemble_summary(&[2, 0, 1], &[10.0, 20.0, 30.0], &starts, 500.0, AssemblyConfig::default()).unwrap();
        assert_eq!(c.chosen, vec![0, 1, 2]);
    }

    #[test]
    fn oversized_top_proposal() {
        let c = assemble_summary(&[1, 0], &[10.0, 200.0], &[0, 5], 100.0, AssemblyConfig::default()).unwrap();
        assert_eq!(c.chosen, vec![1]);
        assert!(c.over_budget);
        assert!(check_candidate(&c, &[10.0, 200.0], &[0, 5], AssemblyConfig::default()).is_err());
        let c = assemble_summary(&[1, 0], &[10.0, 105.0], &[0, 5], 100.0, AssemblyConfig::default()).unwrap();
        assert_eq!(c.chosen, vec![1]);
        assert!(!c.over_budget);
    }

    #[test]
    fn skip_mode_keeps_scanning() {
        let cfg = AssemblyConfig {
            skip_non_fitting: true,
            ..AssemblyConfig::default()
        };
        let c = assemble_summary(&[0, 1, 2], &[60.0, 70.0, 30.0], &[0, 1, 2], 100.0, cfg).unwrap();
        assert_eq!(c.chosen, vec![0, 2]);
    }

    #[test]
    fn candidates_are_reproducible() {
        let theta = [0.9, 0.2, 0.6, 0.4];
        let d = [20.0, 30.0, 25.0, 15.0];
        let s = [0, 10, 20, 30];
        let run = |sigma| {
            generate_candidates(&theta, &d, &s, 50.0, SamplingConfig { k: 10, sigma }, AssemblyConfig::default(), 3, "m")
                .unwrap()
        };
        let a = run(0.05);
        assert_eq!(a.len(), 10);
        assert_eq!(a, run(0.05));
        let z = run(0.0);
        assert!(z.iter().all(|c| c.chosen == z[0].chosen));
    }

    #[test]
    fn best_candidate_selection() {
        assert_eq!(select_best_candidate(&[vec![0.4]], 1), 0);
        let scores = vec![vec![0.2, 1.0, 0.5], vec![0.3, 0.9, 0.9]];
        assert_eq!(select_best_candidate(&scores, 3), 1);
    }
}
