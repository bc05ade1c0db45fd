//! Ground-truth worlds: finite alphabets, likelihood models, and the
//! population objective they induce.
//!
//! Agent i draws symbols from a true distribution f_i and scores hypotheses
//! with likelihood tables ell_i(. | theta). The network objective is
//! F(theta) = (1/n) sum_i KL(f_i ‖ ell_i(. | theta)), minimized on the
//! optimal set. All divergences are in nats.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Hypotheses, likelihood tables, and true distributions for n agents.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldModel {
    pub n: usize,
    /// Number of hypotheses.
    pub m: usize,
    /// Per-agent alphabet sizes.
    pub alphabet_sizes: Vec<usize>,
    /// Per-agent likelihood tables, row-major m x alphabet_sizes[i]:
    /// entry [theta * s + symbol] is ell_i(symbol | theta).
    pub likelihoods: Vec<Vec<f64>>,
    /// Per-agent true distributions over the alphabet.
    pub truths: Vec<Vec<f64>>,
    /// Likelihood floor on supported symbols.
    pub alpha2: f64,
}

/// The objective landscape of a world.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveProfile {
    /// F(theta) per hypothesis.
    pub values: Vec<f64>,
    /// Minimum of F.
    pub f_star: f64,
    /// Hypotheses within 1e-12 of the minimum, ascending.
    pub optimal_set: Vec<usize>,
    /// Gap to the best non-optimal hypothesis; `None` when every
    /// hypothesis is optimal.
    pub c1: Option<f64>,
}

impl ObjectiveProfile {
    /// Gap F(theta) - F* of one hypothesis (zero on the optimal set).
    pub fn gap(&self, theta: usize) -> f64 {
        self.values[theta] - self.f_star
    }

    /// The unique optimum, if there is exactly one.
    pub fn unique_optimum(&self) -> Option<usize> {
        match self.optimal_set.as_slice() {
            [theta] => Some(*theta),
            _ => None,
        }
    }
}

/// Tolerance for membership in the optimal set.
const OPTIMAL_SET_TOLERANCE: f64 = 1e-12;

/// Maximum resampling attempts for constrained random worlds.
const WORLD_MAX_ATTEMPTS: usize = 1000;

/// KL(f ‖ l) in nats with the 0 ln 0 = 0 convention. Infinite divergences
/// (f puts mass where l puts none) are an error.
pub fn kl(f: &[f64], l: &[f64]) -> Result<f64> {
    if f.len() != l.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            got: l.len(),
        });
    }
    let mut total = 0.0;
    for (s, (&fs, &ls)) in f.iter().zip(l).enumerate() {
        if fs > 0.0 {
            if ls <= 0.0 {
                return Err(Error::KlInfinite {
                    symbol: s,
                    mass: fs,
                });
            }
            total += fs * (fs / ls).ln();
        }
    }
    Ok(total)
}

impl WorldModel {
    /// Likelihood row ell_i(. | theta) as a slice over the alphabet.
    pub fn likelihood(&self, agent: usize, theta: usize) -> &[f64] {
        let s = self.alphabet_sizes[agent];
        &self.likelihoods[agent][theta * s..(theta + 1) * s]
    }

    /// ln ell_i(signal | theta) for every theta.
    pub fn log_likelihoods_for_signal(&self, agent: usize, signal: usize) -> Result<Vec<f64>> {
        let s = self.alphabet_sizes[agent];
        if signal >= s {
            return Err(Error::SignalOutOfRange {
                agent,
                signal,
                alphabet: s,
            });
        }
        Ok((0..self.m)
            .map(|theta| self.likelihoods[agent][theta * s + signal].ln())
            .collect())
    }

    /// Structural validation: shapes, stochastic rows, the alpha2 floor on
    /// supported symbols.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::BadDistribution {
                what: "world".into(),
                problem: "needs at least one agent and one hypothesis",
            });
        }
        if self.alphabet_sizes.len() != self.n
            || self.likelihoods.len() != self.n
            || self.truths.len() != self.n
        {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: self.alphabet_sizes.len().min(self.likelihoods.len()),
            });
        }
        if !(self.alpha2 > 0.0 && self.alpha2 < 1.0) {
            return Err(Error::BadDistribution {
                what: "alpha2".into(),
                problem: "must lie in (0, 1)",
            });
        }
        for i in 0..self.n {
            let s = self.alphabet_sizes[i];
            if s == 0 {
                return Err(Error::BadDistribution {
                    what: format!("agent {i} alphabet"),
                    problem: "must be non-empty",
                });
            }
            if self.likelihoods[i].len() != self.m * s {
                return Err(Error::DimensionMismatch {
                    expected: self.m * s,
                    got: self.likelihoods[i].len(),
                });
            }
            check_distribution(&self.truths[i], || format!("truth of agent {i}"))?;
            for theta in 0..self.m {
                let row = self.likelihood(i, theta);
                check_distribution(row, || {
                    format!("likelihood of agent {i}, hypothesis {theta}")
                })?;
                for (sym, (&mass, &lik)) in self.truths[i].iter().zip(row).enumerate() {
                    if mass > 0.0 && lik < self.alpha2 {
                        return Err(Error::BadDistribution {
                            what: format!(
                                "likelihood of agent {i}, hypothesis {theta}, symbol {sym}"
                            ),
                            problem: "below the alpha2 floor on a supported symbol",
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes the versioned text form.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    /// Reads a file written by `save`.
    pub fn load(path: impl AsRef<Path>) -> Result<WorldModel> {
        let path = path.as_ref();
        let reader = BufReader::new(std::fs::File::open(path)?);
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        Self::from_lines(&path.display().to_string(), &lines)
    }

    /// Self-describing text form. Floats print in shortest round-trip form,
    /// so save/load is exact.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "worldmodel v1");
        let _ = writeln!(out, "n {}", self.n);
        let _ = writeln!(out, "m {}", self.m);
        let _ = writeln!(out, "alpha2 {}", self.alpha2);
        for i in 0..self.n {
            let _ = writeln!(out, "agent {i}");
            let _ = writeln!(out, "alphabet {}", self.alphabet_sizes[i]);
            let _ = writeln!(out, "truth {}", join_floats(&self.truths[i]));
            for theta in 0..self.m {
                let _ = writeln!(out, "row {}", join_floats(self.likelihood(i, theta)));
            }
        }
        out
    }

    fn from_lines(path: &str, lines: &[String]) -> Result<WorldModel> {
        let mut cursor = Cursor {
            path,
            lines,
            next: 0,
        };
        cursor.expect_exact("worldmodel v1")?;
        let n: usize = cursor.keyed_value("n")?;
        let m: usize = cursor.keyed_value("m")?;
        let alpha2: f64 = cursor.keyed_value("alpha2")?;
        let mut alphabet_sizes = Vec::with_capacity(n);
        let mut likelihoods = Vec::with_capacity(n);
        let mut truths = Vec::with_capacity(n);
        for i in 0..n {
            let agent: usize = cursor.keyed_value("agent")?;
            if agent != i {
                return Err(cursor.error(format!("expected agent {i}, found {agent}")));
            }
            let s: usize = cursor.keyed_value("alphabet")?;
            let truth = cursor.float_row("truth", s)?;
            let mut table = Vec::with_capacity(m * s);
            for _ in 0..m {
                table.extend(cursor.float_row("row", s)?);
            }
            alphabet_sizes.push(s);
            likelihoods.push(table);
            truths.push(truth);
        }
        let world = WorldModel {
            n,
            m,
            alphabet_sizes,
            likelihoods,
            truths,
            alpha2,
        };
        world.validate()?;
        Ok(world)
    }
}

fn join_floats(v: &[f64]) -> String {
    let mut out = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x}");
    }
    out
}

struct Cursor<'a> {
    path: &'a str,
    lines: &'a [String],
    next: usize,
}

impl Cursor<'_> {
    fn error(&self, msg: String) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line: self.next,
            msg,
        }
    }

    fn take(&mut self) -> Result<&str> {
        while let Some(line) = self.lines.get(self.next) {
            self.next += 1;
            let t = line.trim();
            if !t.is_empty() {
                return Ok(t);
            }
        }
        Err(Error::Parse {
            path: self.path.to_string(),
            line: self.lines.len(),
            msg: "unexpected end of file".into(),
        })
    }

    fn expect_exact(&mut self, want: &str) -> Result<()> {
        let got = self.take()?;
        if got != want {
            let msg = format!("expected {want:?}, found {got:?}");
            return Err(self.error(msg));
        }
        Ok(())
    }

    fn keyed_value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.take()?.to_string();
        let rest = line
            .strip_prefix(key)
            .map(str::trim)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| self.error(format!("expected \"{key} <value>\", found {line:?}")))?;
        rest.parse()
            .map_err(|_| self.error(format!("cannot parse {rest:?} as a {key} value")))
    }

    fn float_row(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let line = self.take()?.to_string();
        let rest = line
            .strip_prefix(key)
            .ok_or_else(|| self.error(format!("expected a \"{key}\" line, found {line:?}")))?;
        let vals: std::result::Result<Vec<f64>, _> =
            rest.split_whitespace().map(str::parse).collect();
        let vals = vals.map_err(|_| self.error(format!("bad float in {line:?}")))?;
        if vals.len() != len {
            return Err(self.error(format!(
                "expected {len} values on a \"{key}\" line, found {}",
                vals.len()
            )));
        }
        Ok(vals)
    }
}

fn check_distribution(p: &[f64], what: impl Fn() -> String) -> Result<()> {
    for &v in p {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::BadDistribution {
                what: what(),
                problem: "has a negative or non-finite entry",
            });
        }
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadDistribution {
            what: what(),
            problem: "does not sum to 1",
        });
    }
    Ok(())
}

/// Network objective F(theta) = (1/n) sum_i KL(f_i ‖ ell_i(. | theta)),
/// its optimal set, and the second-best gap.
pub fn objective(world: &WorldModel) -> Result<ObjectiveProfile> {
    let mut values = Vec::with_capacity(world.m);
    for theta in 0..world.m {
        let mut total = 0.0;
        for i in 0..world.n {
            total += kl(&world.truths[i], world.likelihood(i, theta))?;
        }
        values.push(total / world.n as f64);
    }
    let f_star = values.iter().copied().fold(f64::INFINITY, f64::min);
    let optimal_set: Vec<usize> = (0..world.m)
        .filter(|&t| values[t] - f_star <= OPTIMAL_SET_TOLERANCE)
        .collect();
    let c1 = values
        .iter()
        .enumerate()
        .filter(|(t, _)| !optimal_set.contains(t))
        .map(|(_, &v)| v - f_star)
        .fold(None, |acc: Option<f64>, gap| {
            Some(acc.map_or(gap, |a| a.min(gap)))
        });
    Ok(ObjectiveProfile {
        values,
        f_star,
        optimal_set,
        c1,
    })
}

/// Samples a world with Dirichlet(1) rows. Likelihood rows are mixed toward
/// uniform so every entry strictly exceeds `alpha2`; truths are left
/// unfloored (their support may be partial). With `unique_optimum`, worlds
/// are resampled until exactly one hypothesis is optimal and the second-best
/// gap is at least `min_gap`.
pub fn random_world<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    alphabet_size: usize,
    alpha2: f64,
    unique_optimum: bool,
    min_gap: f64,
    rng: &mut R,
) -> Result<WorldModel> {
    if n == 0 || m < 2 || alphabet_size < 2 {
        return Err(Error::BadDistribution {
            what: "random world shape".into(),
            problem: "needs n >= 1, m >= 2, alphabet >= 2",
        });
    }
    if alpha2 <= 0.0 || !alpha2.is_finite() || alphabet_size as f64 * alpha2 >= 1.0 {
        return Err(Error::BadDistribution {
            what: "alpha2".into(),
            problem: "needs alpha2 > 0 with alphabet * alpha2 < 1",
        });
    }
    for attempt in 0..WORLD_MAX_ATTEMPTS {
        let mut likelihoods = Vec::with_capacity(n);
        let mut truths = Vec::with_capacity(n);
        for _ in 0..n {
            truths.push(dirichlet(alphabet_size, rng));
            let mut table = Vec::with_capacity(m * alphabet_size);
            for _ in 0..m {
                table.extend(floored_dirichlet(alphabet_size, alpha2, rng));
            }
            likelihoods.push(table);
        }
        let world = WorldModel {
            n,
            m,
            alphabet_sizes: vec![alphabet_size; n],
            likelihoods,
            truths,
            alpha2,
        };
        if !unique_optimum {
            return Ok(world);
        }
        let profile = objective(&world)?;
        if profile.unique_optimum().is_some() && profile.c1.is_some_and(|c1| c1 >= min_gap) {
            return Ok(world);
        }
        let _ = attempt;
    }
    Err(Error::WorldRetriesExhausted {
        attempts: WORLD_MAX_ATTEMPTS,
        min_gap,
    })
}

/// Uniform sample from the simplex via normalized exponentials.
fn dirichlet<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..len)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let sum: f64 = v.iter().sum();
        if sum > 0.0 {
            v.iter_mut().for_each(|x| *x /= sum);
            return v;
        }
    }
}

/// Simplex sample with every entry strictly above the floor: mixes a
/// Dirichlet draw with the floor mass, which keeps the row stochastic.
fn floored_dirichlet<R: Rng + ?Sized>(len: usize, floor: f64, rng: &mut R) -> Vec<f64> {
    let slack = 1.0 - len as f64 * floor;
    dirichlet(len, rng)
        .into_iter()
        .map(|q| floor + slack * q)
        .collect()
}

/// Draws one symbol from agent `i`'s true distribution by inverse CDF.
pub fn sample_signal<R: Rng + ?Sized>(world: &WorldModel, agent: usize, rng: &mut R) -> usize {
    let truth = &world.truths[agent];
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_supported = 0;
    for (s, &p) in truth.iter().enumerate() {
        if p > 0.0 {
            last_supported = s;
            cum += p;
            if u < cum {
                return s;
            }
        }
    }
    last_supported
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, PURPOSE_WORLD};
    use approx::assert_relative_eq;

    fn rng(tag: u64) -> rand_chacha::ChaCha8Rng {
        derive_rng(99, PURPOSE_WORLD, tag, 0, 0)
    }

    /// Two agents, two hypotheses, binary alphabet, closed-form KLs.
    fn tiny_world() -> WorldModel {
        WorldModel {
            n: 2,
            m: 2,
            alphabet_sizes: vec![2, 2],
            // Rows: theta 0, theta 1.
            likelihoods: vec![vec![0.9, 0.1, 0.5, 0.5], vec![0.8, 0.2, 0.5, 0.5]],
            truths: vec![vec![0.9, 0.1], vec![0.8, 0.2]],
            alpha2: 0.05,
        }
    }

    #[test]
    fn kl_matches_closed_forms() {
        assert_relative_eq!(kl(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_relative_eq!(
            kl(&[1.0, 0.0], &[0.5, 0.5]).unwrap(),
            std::f64::consts::LN_2,
            max_relative = 1e-15
        );
        assert!(matches!(
            kl(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::KlInfinite { symbol: 1, .. })
        ));
        assert!(kl(&[0.5, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn kl_agrees_with_reversed_order_summation() {
        // Same sum accumulated back to front; agreement to 1e-12 guards the
        // arithmetic rather than the formula.
        let mut r = rng(1);
        for _ in 0..50 {
            let f = dirichlet(17, &mut r);
            let l = floored_dirichlet(17, 1e-4, &mut r);
            let forward = kl(&f, &l).unwrap();
            let backward: f64 = f
                .iter()
                .zip(&l)
                .rev()
                .filter(|(&fs, _)| fs > 0.0)
                .map(|(&fs, &ls)| fs * (fs / ls).ln())
                .sum();
            assert_relative_eq!(forward, backward, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn objective_averages_agent_divergences() {
        let w = tiny_world();
        let p = objective(&w).unwrap();
        // Theta 0 matches both truths exactly.
        assert_relative_eq!(p.values[0], 0.0);
        let expect1 =
            (kl(&w.truths[0], &[0.5, 0.5]).unwrap() + kl(&w.truths[1], &[0.5, 0.5]).unwrap()) / 2.0;
        assert_relative_eq!(p.values[1], expect1, max_relative = 1e-14);
        assert_eq!(p.optimal_set, vec![0]);
        assert_eq!(p.unique_optimum(), Some(0));
        assert_relative_eq!(p.c1.unwrap(), expect1, max_relative = 1e-14);
        assert_relative_eq!(p.gap(1), expect1, max_relative = 1e-14);
    }

    #[test]
    fn tied_optima_have_no_second_best_gap() {
        let mut w = tiny_world();
        // Make theta 1 a copy of theta 0 for both agents.
        for i in 0..2 {
            let row0 = w.likelihood(i, 0).to_vec();
            w.likelihoods[i][2..4].copy_from_slice(&row0);
        }
        let p = objective(&w).unwrap();
        assert_eq!(p.optimal_set, vec![0, 1]);
        assert_eq!(p.unique_optimum(), None);
        assert_eq!(p.c1, None);
    }

    #[test]
    fn random_world_is_reproducible_and_floored() {
        let a = random_world(4, 6, 10, 1e-3, true, 1e-3, &mut rng(2)).unwrap();
        let b = random_world(4, 6, 10, 1e-3, true, 1e-3, &mut rng(2)).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        for i in 0..a.n {
            for theta in 0..a.m {
                for &v in a.likelihood(i, theta) {
                    assert!(v >= a.alpha2);
                }
            }
            let sum: f64 = a.truths[i].iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        let p = objective(&a).unwrap();
        assert_eq!(p.optimal_set.len(), 1);
        assert!(p.c1.unwrap() >= 1e-3);
    }

    #[test]
    fn unreachable_gap_exhausts_retries() {
        // KL is capped near ln(1/alpha2), so a 100-nat gap can never appear.
        let r = random_world(2, 3, 4, 0.2, true, 100.0, &mut rng(3));
        assert!(matches!(r, Err(Error::WorldRetriesExhausted { .. })));
    }

    #[test]
    fn invalid_world_parameters_are_rejected() {
        assert!(random_world(0, 3, 4, 1e-3, false, 0.0, &mut rng(4)).is_err());
        assert!(random_world(2, 1, 4, 1e-3, false, 0.0, &mut rng(4)).is_err());
        assert!(random_world(2, 3, 1, 1e-3, false, 0.0, &mut rng(4)).is_err());
        // alphabet * alpha2 >= 1 leaves no room for the slack mass.
        assert!(random_world(2, 3, 4, 0.25, false, 0.0, &mut rng(4)).is_err());
    }

    #[test]
    fn sample_signal_follows_the_truth() {
        let mut w = tiny_world();
        w.truths[0] = vec![1.0, 0.0];
        let mut r = rng(5);
        for _ in 0..100 {
            assert_eq!(sample_signal(&w, 0, &mut r), 0);
        }
        // Frequencies concentrate around f_1 = (0.8, 0.2).
        let draws = 100_000;
        let mut count = 0;
        for _ in 0..draws {
            if sample_signal(&w, 1, &mut r) == 0 {
                count += 1;
            }
        }
        let phat = count as f64 / draws as f64;
        let sigma = (0.8 * 0.2 / draws as f64).sqrt();
        assert!((phat - 0.8).abs() < 5.0 * sigma, "phat={phat}");
    }

    #[test]
    fn hypothesis_permutation_permutes_the_objective() {
        let w = random_world(3, 5, 6, 1e-3, false, 0.0, &mut rng(6)).unwrap();
        let p = objective(&w).unwrap();
        // Reverse the hypothesis order.
        let mut permuted = w.clone();
        for i in 0..w.n {
            let s = w.alphabet_sizes[i];
            let mut table = Vec::with_capacity(w.m * s);
            for theta in (0..w.m).rev() {
                table.extend_from_slice(w.likelihood(i, theta));
            }
            permuted.likelihoods[i] = table;
        }
        let q = objective(&permuted).unwrap();
        for theta in 0..w.m {
            assert_relative_eq!(q.values[theta], p.values[w.m - 1 - theta]);
        }
        assert_relative_eq!(q.f_star, p.f_star);
        assert_eq!(q.c1.is_some(), p.c1.is_some());
    }

    #[test]
    fn save_load_roundtrip_is_exact() {
        let dir = std::env::temp_dir().join(format!("worldio-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("world.txt");
        let w = random_world(3, 4, 7, 1e-3, false, 0.0, &mut rng(7)).unwrap();
        w.save(&path).unwrap();
        let loaded = WorldModel::load(&path).unwrap();
        assert_eq!(w, loaded);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn load_rejects_corrupt_files() {
        let dir = std::env::temp_dir().join(format!("worldio-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let header = dir.join("header.txt");
        std::fs::write(&header, "worldmodel v2\nn 1\n").unwrap();
        assert!(matches!(
            WorldModel::load(&header),
            Err(Error::Parse { line: 1, .. })
        ));
        let w = tiny_world();
        let truncated = dir.join("truncated.txt");
        let text = w.to_text();
        let cut: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        std::fs::write(&truncated, cut).unwrap();
        assert!(WorldModel::load(&truncated).is_err());
        // A non-stochastic row fails validation, not just parsing.
        let skewed = dir.join("skewed.txt");
        std::fs::write(&skewed, text.replace("truth 0.9 0.1", "truth 0.9 0.3")).unwrap();
        assert!(matches!(
            WorldModel::load(&skewed),
            Err(Error::BadDistribution { .. })
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn validate_enforces_the_floor_on_supported_symbols() {
        let mut w = tiny_world();
        w.likelihoods[0][1] = 0.01; // below alpha2 = 0.05 on a supported symbol
        w.likelihoods[0][0] = 0.99;
        assert!(matches!(w.validate(), Err(Error::BadDistribution { .. })));
        // The same entry is fine when the truth puts no mass there.
        w.truths[0] = vec![1.0, 0.0];
        w.validate().unwrap();
    }
}
