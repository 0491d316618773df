use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

/// Default mean baseline rating.
pub const DEFAULT_ANCHOR: f64 = 1000.0;
/// Fitted ratings never leave `anchor ± RATING_CLAMP`.
pub const RATING_CLAMP: f64 = 2000.0;

const LN10_OVER_400: f64 = std::f64::consts::LN_10 / 400.0;

/// `1 / (1 + 10^((r_b − r_a)/400))`
pub fn elo_expected(r_a: f64, r_b: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((r_b - r_a) / 400.0))
}

/// One decided comparison; `score_a` is 1 (A won), 0.5 (tie) or 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Game {
    pub a: String,
    pub b: String,
    pub score_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub model: String,
    pub elo: f64,
    pub games: u64,
}

/// Sorts descending by rating, then by name.
pub fn leaderboard(mut ratings: Vec<Rating>) -> Vec<Rating> {
    ratings.sort_by(|x, y| y.elo.total_cmp(&x.elo).then_with(|| x.model.cmp(&y.model)));
    ratings
}

pub trait RatingEstimator: Send + Sync {
    fn name(&self) -> &str;

    /// Ratings for every model in `games`, shifted so that the mean rating of
    /// `baselines` (or of all models, when empty) equals `anchor`.
    fn fit(&self, games: &[Game], baselines: &[String], anchor: f64) -> Result<Vec<Rating>>;
}

struct Indexed {
    names: Vec<String>,
    /// (i, j, score of i, games) aggregated per ordered pair
    pairs: Vec<(usize, usize, f64, f64)>,
    counts: Vec<u64>,
}

fn index_games(games: &[Game]) -> Result<Indexed> {
    if games.is_empty() {
        return Err(Error::EmptyDataset("no games to rate".into()));
    }
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for g in games {
        if g.a == g.b {
            return Err(Error::invariant("game", format!("`{}` plays itself", g.a)));
        }
        if !(0.0..=1.0).contains(&g.score_a) {
            return Err(Error::invariant("score_a", format!("{} outside [0, 1]", g.score_a)));
        }
        ids.entry(&g.a).or_insert(0);
        ids.entry(&g.b).or_insert(0);
    }
    for (k, v) in ids.values_mut().enumerate() {
        *v = k;
    }
    let names: Vec<String> = ids.keys().map(|s| s.to_string()).collect();
    let mut agg: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    let mut counts = vec![0u64; names.len()];
    for g in games {
        let (i, j) = (ids[g.a.as_str()], ids[g.b.as_str()]);
        counts[i] += 1;
        counts[j] += 1;
        // store with i < j so that opposite orientations merge
        let (key, s) = if i < j {
            ((i, j), g.score_a)
        } else {
            ((j, i), 1.0 - g.score_a)
        };
        let e = agg.entry(key).or_insert((0.0, 0.0));
        e.0 += s;
        e.1 += 1.0;
    }
    let pairs = agg.into_iter().map(|((i, j), (s, n))| (i, j, s, n)).collect();
    Ok(Indexed { names, pairs, counts })
}

fn gauge_indices(names: &[String], baselines: &[String]) -> Result<Vec<usize>> {
    if baselines.is_empty() {
        return Ok((0..names.len()).collect());
    }
    baselines
        .iter()
        .map(|b| {
            names
                .iter()
                .position(|n| n == b)
                .ok_or_else(|| Error::invariant("baselines", format!("baseline `{b}` has no games")))
        })
        .collect()
}

fn shift_to_anchor(r: &mut [f64], gauge: &[usize], anchor: f64) {
    let mean = gauge.iter().map(|&i| r[i]).sum::<f64>() / gauge.len() as f64;
    r.iter_mut().for_each(|x| *x += anchor - mean);
}

fn ratings_from(ix: &Indexed, elo: Vec<f64>) -> Vec<Rating> {
    ix.names
        .iter()
        .zip(elo)
        .zip(&ix.counts)
        .map(|((m, e), c)| Rating {
            model: m.clone(),
            elo: e,
            games: *c,
        })
        .collect()
}

/// Bradley–Terry maximum likelihood on the Elo scale, solved by Newton's
/// method; ties count half a win for each side.
#[derive(Debug, Clone, Copy)]
pub struct BtMle {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for BtMle {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-10,
        }
    }
}

impl RatingEstimator for BtMle {
    fn name(&self) -> &str {
        "bt-mle"
    }

    fn fit(&self, games: &[Game], baselines: &[String], anchor: f64) -> Result<Vec<Rating>> {
        let ix = index_games(games)?;
        let gauge = gauge_indices(&ix.names, baselines)?;
        let n = ix.names.len();
        // natural parameters: θ = R · ln10 / 400
        let mut theta: Vec<f64> = vec![0.0; n];
        let bound = RATING_CLAMP * LN10_OVER_400;
        let mut clamped = false;
        for _ in 0..self.max_iter {
            let mut grad = DVector::<f64>::zeros(n);
            let mut hess = DMatrix::<f64>::zeros(n, n);
            for &(i, j, s, m) in &ix.pairs {
                let p = 1.0 / (1.0 + (theta[j] - theta[i]).exp());
                grad[i] += s - m * p;
                grad[j] -= s - m * p;
                let w = m * p * (1.0 - p);
                hess[(i, i)] += w;
                hess[(j, j)] += w;
                hess[(i, j)] -= w;
                hess[(j, i)] -= w;
            }
            // The likelihood is flat along the all-ones direction; pin it.
            hess.add_scalar_mut(1.0 / n as f64);
            for k in 0..n {
                hess[(k, k)] += 1e-12;
            }
            let step = match hess.clone().cholesky() {
                Some(c) => c.solve(&grad),
                None => hess
                    .lu()
                    .solve(&grad)
                    .ok_or_else(|| Error::NonFinite("Bradley-Terry Newton system".into()))?,
            };
            let mut next: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t + d).collect();
            if next.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("Bradley-Terry ratings".into()));
            }
            shift_to_anchor(&mut next, &gauge, 0.0);
            for x in &mut next {
                if x.abs() > bound {
                    *x = x.clamp(-bound, bound);
                    clamped = true;
                }
            }
            let delta = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            theta = next;
            if delta / LN10_OVER_400 < self.tol {
                break;
            }
        }
        if clamped {
            log::warn!("ratings diverge (one-sided results); clamped at ±{RATING_CLAMP} from the anchor");
        }
        let elo = theta.iter().map(|t| anchor + t / LN10_OVER_400).collect();
        Ok(ratings_from(&ix, elo))
    }
}

/// Sequential Elo updates in game order, then shifted to the anchor.
#[derive(Debug, Clone, Copy)]
pub struct OnlineElo {
    pub k: f64,
}

impl Default for OnlineElo {
    fn default() -> Self {
        Self { k: 4.0 }
    }
}

impl RatingEstimator for OnlineElo {
    fn name(&self) -> &str {
        "online-elo"
    }

    fn fit(&self, games: &[Game], baselines: &[String], anchor: f64) -> Result<Vec<Rating>> {
        let ix = index_games(games)?;
        let gauge = gauge_indices(&ix.names, baselines)?;
        let pos = |m: &str| ix.names.iter().position(|n| n == m).expect("indexed");
        let mut r = vec![anchor; ix.names.len()];
        for g in games {
            let (i, j) = (pos(&g.a), pos(&g.b));
            let e = elo_expected(r[i], r[j]);
            r[i] += self.k * (g.score_a - e);
            r[j] -= self.k * (g.score_a - e);
        }
        shift_to_anchor(&mut r, &gauge, anchor);
        Ok(ratings_from(&ix, r))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EstimatorParams {
    pub k: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self { k: 4.0 }
    }
}

pub type EstimatorRegistry = Registry<Box<dyn RatingEstimator>, EstimatorParams>;

/// `bt-mle` (default) and `online-elo`.
pub fn estimator_registry() -> EstimatorRegistry {
    let mut reg = EstimatorRegistry::new("rating estimator");
    reg.register("bt-mle", |_: &EstimatorParams| {
        Ok(Box::new(BtMle::default()) as Box<dyn RatingEstimator>)
    });
    reg.register("online-elo", |p: &EstimatorParams| {
        Ok(Box::new(OnlineElo { k: p.k }) as Box<dyn RatingEstimator>)
    });
    reg
}

/// Bradley–Terry fit with default settings.
pub fn fit_elo(games: &[Game], baselines: &[String], anchor: f64) -> Result<Vec<Rating>> {
    BtMle::default().fit(games, baselines, anchor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn games(a: &str, b: &str, wins: usize, losses: usize, ties: usize) -> Vec<Game> {
        let g = |s: f64| Game {
            a: a.into(),
            b: b.into(),
            score_a: s,
        };
        std::iter::repeat_n(g(1.0), wins)
            .chain(std::iter::repeat_n(g(0.0), losses))
            .chain(std::iter::repeat_n(g(0.5), ties))
            .collect()
    }

    fn elo_of(r: &[Rating], m: &str) -> f64 {
        r.iter().find(|x| x.model == m).unwrap().elo
    }

    #[test]
    fn expected_score() {
        assert_eq!(elo_expected(1200.0, 1200.0), 0.5);
        assert!((elo_expected(1400.0, 1000.0) - 10.0 / 11.0).abs() < 1e-12);
        assert!((elo_expected(1400.0, 1000.0) - 0.909_091).abs() < 1e-6);
        assert!((elo_expected(3.0, 250.0) + elo_expected(250.0, 3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_model_closed_form() {
        let g = games("A", "B", 64, 36, 0);
        let r = fit_elo(&g, &["B".to_string()], 1000.0).unwrap();
        let gap = elo_of(&r, "A") - elo_of(&r, "B");
        assert!((gap - 400.0 * (64.0f64 / 36.0).log10()).abs() < 1e-8, "{gap}");
        assert!((gap - 99.95).abs() < 0.01);
        assert_eq!(elo_of(&r, "B"), 1000.0);
        let r = OnlineElo::default().fit(&g, &["B".to_string()], 1000.0).unwrap();
        assert!(elo_of(&r, "A") > elo_of(&r, "B"));
    }

    #[test]
    fn all_ties_sit_on_anchor() {
        let mut g = games("A", "B", 0, 0, 10);
        g.extend(games("B", "C", 0, 0, 10));
        for r in fit_elo(&g, &[], 1000.0).unwrap() {
            assert!((r.elo - 1000.0).abs() < 1e-9);
        }
    }

    #[test]
    fn one_sided_results_are_clamped() {
        let g = games("A", "B", 20, 0, 0);
        let r = fit_elo(&g, &["B".to_string()], 1000.0).unwrap();
        assert!(r.iter().all(|x| x.elo.is_finite()));
        assert!(elo_of(&r, "A") - elo_of(&r, "B") <= 2.0 * RATING_CLAMP + 1e-9);
        assert!(elo_of(&r, "A") > elo_of(&r, "B") + 1000.0);
    }

    #[test]
    fn duplication_and_orientation_invariance() {
        let mut g = games("A", "B", 7, 3, 2);
        g.extend(games("C", "A", 4, 5, 1));
        g.extend(games("B", "C", 2, 6, 0));
        let base = fit_elo(&g, &[], 1000.0).unwrap();
        let tripled: Vec<Game> = g.iter().cycle().take(3 * g.len()).cloned().collect();
        let again = fit_elo(&tripled, &[], 1000.0).unwrap();
        let flipped: Vec<Game> = g
            .iter()
            .map(|x| Game {
                a: x.b.clone(),
                b: x.a.clone(),
                score_a: 1.0 - x.score_a,
            })
            .collect();
        let flipped = fit_elo(&flipped, &[], 1000.0).unwrap();
        for (x, (y, z)) in base.iter().zip(again.iter().zip(&flipped)) {
            assert!((x.elo - y.elo).abs() < 1e-6);
            assert!((x.elo - z.elo).abs() < 1e-6);
        }
    }

    #[test]
    fn registry_and_errors() {
        let reg = estimator_registry();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["bt-mle", "online-elo"]);
        assert!(fit_elo(&[], &[], 1000.0).is_err());
        let g = games("A", "B", 1, 1, 0);
        assert!(fit_elo(&g, &["Z".to_string()], 1000.0).is_err());
    }
}
