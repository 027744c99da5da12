//! Server side of the protocol: the comparative-elimination filter and
//! survivor averaging.
//!
//! The filter sorts received iterates by Euclidean distance to the current
//! global iterate and discards the f farthest. It never sees agent
//! identities beyond their indices; the honest/Byzantine diagnostics are
//! attached afterward by the simulator from ground-truth labels.

use crate::error::{Error, Result};
use crate::point::Point;

/// Result of one filter application.
///
/// `survivors` and `eliminated` partition the agent indices; both are kept
/// in ascending index order. `distances` records `(agent, ‖x̄ − mᵢ‖)` for
/// every agent. The two label-based counts are diagnostics filled by
/// [`FilterOutcome::attach_labels`]; they always satisfy
/// `byz_survivors == honest_eliminated`.
#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub survivors: Vec<usize>,
    pub eliminated: Vec<usize>,
    pub distances: Vec<(usize, f64)>,
    pub byz_survivors: usize,
    pub honest_eliminated: usize,
    /// True when a surviving message is non-finite (more than f garbage
    /// messages); the round should be reported as divergent.
    pub nonfinite_survivor: bool,
}

/// Sort key: non-finite distances rank last, ties break by agent index.
fn distance_key(d: f64) -> f64 {
    if d.is_finite() {
        d
    } else {
        f64::INFINITY
    }
}

/// Keep the N−f messages closest to `x_bar`, eliminating the f largest
/// distances. Ties break by ascending agent index; the output does not
/// depend on the input order.
pub fn ce_filter(messages: &[(usize, Point)], x_bar: &Point, f: usize) -> Result<FilterOutcome> {
    let n = messages.len();
    if f >= n {
        return Err(Error::config(format!(
            "filter requires f < N, got f={f}, N={n}"
        )));
    }
    for (_, m) in messages {
        m.check_dim(x_bar.dim())?;
    }

    let mut ranked: Vec<(usize, f64)> = messages
        .iter()
        .map(|(id, m)| (*id, x_bar.dist(m)))
        .collect();
    ranked.sort_by(|a, b| {
        distance_key(a.1)
            .partial_cmp(&distance_key(b.1))
            .expect("keys are never NaN")
            .then(a.0.cmp(&b.0))
    });

    let mut survivors: Vec<usize> = ranked[..n - f].iter().map(|(id, _)| *id).collect();
    let mut eliminated: Vec<usize> = ranked[n - f..].iter().map(|(id, _)| *id).collect();
    let nonfinite_survivor = ranked[..n - f].iter().any(|(_, d)| !d.is_finite());
    survivors.sort_unstable();
    eliminated.sort_unstable();

    let mut distances = ranked;
    distances.sort_unstable_by_key(|(id, _)| *id);

    Ok(FilterOutcome {
        survivors,
        eliminated,
        distances,
        byz_survivors: 0,
        honest_eliminated: 0,
        nonfinite_survivor,
    })
}

impl FilterOutcome {
    /// Fill the diagnostic counts from ground-truth labels. The labels are
    /// known only to the simulator; the filter itself stays identity-blind.
    pub fn attach_labels(&mut self, is_byzantine: &dyn Fn(usize) -> bool) {
        self.byz_survivors = self.survivors.iter().filter(|&&i| is_byzantine(i)).count();
        self.honest_eliminated = self
            .eliminated
            .iter()
            .filter(|&&i| !is_byzantine(i))
            .count();
    }
}

/// Arithmetic mean of the survivor messages. The caller supplies them in
/// ascending agent-index order so the summation order is canonical.
pub fn aggregate(survivor_messages: &[&Point]) -> Result<Point> {
    let first = survivor_messages
        .first()
        .ok_or_else(|| Error::config("aggregate requires a nonempty survivor list"))?;
    let dim = first.dim();
    let mut sum = Point::zeros(dim);
    for m in survivor_messages {
        m.check_dim(dim)?;
        sum.add_scaled(1.0, m);
    }
    Ok(sum.scale(1.0 / survivor_messages.len() as f64))
}

/// The filter's effective perturbation of the honest average:
/// `(1/|H|)·[Σ_{i∈B_k}(mᵢ − x̄) − Σ_{i∈H\H_k}(mᵢ − x̄)]` where `B_k` are the
/// Byzantine survivors and `H\H_k` the honest eliminated. Diagnostic only;
/// requires ground-truth labels.
pub fn byzantine_correction_term(
    survivors: &[usize],
    all_messages: &[(usize, Point)],
    is_byzantine: &dyn Fn(usize) -> bool,
    x_bar: &Point,
) -> Result<Point> {
    let n_honest = all_messages
        .iter()
        .filter(|(id, _)| !is_byzantine(*id))
        .count();
    if n_honest == 0 {
        return Err(Error::config("correction term requires honest agents"));
    }
    let survives = |id: usize| survivors.contains(&id);
    let mut sum = Point::zeros(x_bar.dim());
    for (id, m) in all_messages {
        m.check_dim(x_bar.dim())?;
        let byz = is_byzantine(*id);
        if byz && survives(*id) {
            sum.add_scaled(1.0, &m.sub(x_bar));
        } else if !byz && !survives(*id) {
            sum.add_scaled(-1.0, &m.sub(x_bar));
        }
    }
    Ok(sum.scale(1.0 / n_honest as f64))
}
