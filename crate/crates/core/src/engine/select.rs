use super::{Contrastivity, TruthMatrix};
use crate::{Error, Result};

/// Contrastivity of one truth column (target row first): one minus the
/// fraction of distractors the utterance is true of.
pub fn contrastivity(truth_column: &[bool], n_distractors: usize) -> Result<Contrastivity> {
    if n_distractors == 0 {
        return Err(Error::EmptyInput("n_distractors"));
    }
    if truth_column.len() != n_distractors + 1 {
        return Err(Error::ColumnLength {
            len: truth_column.len(),
            expected: n_distractors + 1,
        });
    }
    let true_of = truth_column[1..].iter().filter(|&&t| t).count();
    Ok(Contrastivity::new(n_distractors - true_of, n_distractors))
}

/// All indices attaining the maximal contrastivity, restricted to
/// target-true utterances whenever any exist.
pub fn select_most_contrastive(
    contrastivities: &[Contrastivity],
    target_true: &[bool],
) -> Vec<usize> {
    debug_assert_eq!(contrastivities.len(), target_true.len());
    let any_target_true = target_true.iter().any(|&t| t);
    let eligible = |i: usize| !any_target_true || target_true[i];
    let max = (0..contrastivities.len())
        .filter(|&i| eligible(i))
        .map(|i| contrastivities[i])
        .max();
    match max {
        None => Vec::new(),
        Some(max) => (0..contrastivities.len())
            .filter(|&i| eligible(i) && contrastivities[i] == max)
            .collect(),
    }
}

/// Outcome of greedy utterance selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InfomaxChoice {
    pub index: usize,
    /// Set when every candidate was false of the target and the selection
    /// had to fall back to the full pool.
    pub degenerate: bool,
}

/// The utterance with maximal contrastivity among target-true candidates,
/// ties broken by lowest proposal index. If no candidate is true of the
/// target, the lowest-index maximally contrastive one is returned with a
/// degenerate flag.
pub fn infomax_select(matrix: &TruthMatrix) -> Result<InfomaxChoice> {
    if matrix.utterances.is_empty() {
        return Err(Error::EmptyInput("utterances"));
    }
    let contrastivities = matrix.contrastivities()?;
    let target_true = matrix.target_true_flags();
    let survivors = select_most_contrastive(&contrastivities, &target_true);
    let index = survivors[0];
    Ok(InfomaxChoice {
        index,
        degenerate: !target_true.iter().any(|&t| t),
    })
}

/// Pragmatic speaker distribution over the matrix's utterances:
/// P(u) is proportional to exp(alpha * (log L0(target|u) - cost(u))), where
/// the literal listener L0(s|u) normalizes the utterance's truth column over
/// states. Utterances false of the target get probability zero.
pub fn rsa_speaker(matrix: &TruthMatrix, alpha: f64, costs: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = matrix.utterances.len();
    if n == 0 {
        return Err(Error::EmptyInput("utterances"));
    }
    matrix.check_rectangular()?;
    if let Some(costs) = costs {
        if costs.len() != n {
            return Err(Error::ColumnLength {
                len: costs.len(),
                expected: n,
            });
        }
    }
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidConfig("alpha must be a positive real".into()));
    }

    let mut weights = vec![0.0f64; n];
    let mut total = 0.0f64;
    for u in 0..n {
        let column = matrix.column(u);
        let true_states = column.iter().filter(|&&t| t).count();
        let listener_target = if column[0] {
            1.0 / true_states as f64
        } else {
            0.0
        };
        if listener_target > 0.0 {
            let cost = costs.map_or(0.0, |c| c[u]);
            let w = (alpha * (listener_target.ln() - cost)).exp();
            weights[u] = w;
            total += w;
        }
    }
    if total == 0.0 {
        return Err(Error::AllTargetFalse);
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}
