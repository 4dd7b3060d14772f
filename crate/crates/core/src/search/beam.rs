//! Length-synchronous beam search.

use std::cmp::Ordering;

/// A model that scores the next token given a decoding state.
pub trait Decoder {
    type State: Clone;

    fn vocab_size(&self) -> usize;

    fn eos(&self) -> usize;

    /// The initial state and the log-probabilities of the first token.
    fn start(&self) -> (Self::State, Vec<f64>);

    /// Feeds one token to each state; returns the successor states and the
    /// log-probabilities of the token after.
    fn advance(&self, items: &[(&Self::State, usize)]) -> Vec<(Self::State, Vec<f64>)>;
}

/// Restricts which token sequences the search may produce.
pub trait Constraint {
    type State: Clone;

    fn start(&self) -> Self::State;

    /// Cheap test of whether `token` may follow.
    fn allows(&self, s: &Self::State, token: usize) -> bool;

    /// Extends the state, or returns `None` to prune the hypothesis.
    fn extend(&self, s: &Self::State, token: usize) -> Option<Self::State>;
}

/// Accepts every sequence.
pub struct Unconstrained;

impl Constraint for Unconstrained {
    type State = ();

    fn start(&self) {}

    fn allows(&self, _: &(), _: usize) -> bool {
        true
    }

    fn extend(&self, _: &(), _: usize) -> Option<()> {
        Some(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BeamConfig {
    pub width: usize,
    /// Most tokens in a sequence, including the end token.
    pub max_len: usize,
    /// Treat sequences that reach `max_len` without the end token as
    /// complete instead of dropping them.
    pub finish_at_max_len: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    /// Sum of the chosen tokens' log-probabilities.
    pub score: f64,
}

struct Live<DS, CS> {
    tokens: Vec<usize>,
    score: f64,
    dstate: DS,
    cstate: CS,
    log_probs: Vec<f64>,
}

fn by_score(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal)
}

/// Returns up to `width` complete sequences, best first.
///
/// At every step all legal one-token extensions of the live hypotheses are
/// ranked, and accepted best-first until `width` slots are used. Pruned
/// extensions do not use a slot; extensions ending in the end token move
/// to the finished list and do.
pub fn beam_search<D: Decoder, C: Constraint>(dec: &D, con: &C, cfg: &BeamConfig) -> Vec<Hypothesis> {
    let width = cfg.width.max(1);
    let eos = dec.eos();
    let (d0, lp0) = dec.start();
    let mut live = vec![Live { tokens: vec![], score: 0.0, dstate: d0, cstate: con.start(), log_probs: lp0 }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for step in 0..cfg.max_len {
        let mut ext: Vec<(f64, usize, usize)> = Vec::new();
        for (k, h) in live.iter().enumerate() {
            for (tok, &lp) in h.log_probs.iter().enumerate() {
                if lp.is_finite() && con.allows(&h.cstate, tok) {
                    ext.push((h.score + lp, k, tok));
                }
            }
        }
        let by = |a: &(f64, usize, usize), b: &(f64, usize, usize)| {
            b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then((a.1, a.2).cmp(&(b.1, b.2)))
        };
        let last = step + 1 == cfg.max_len;
        let mut next: Vec<(usize, usize, f64, C::State)> = Vec::new();
        let mut used = 0;
        // Rank a prefix first; the rest is sorted only if pruning eats it.
        let mut sorted = 0;
        let mut k = 0;
        while used < width && k < ext.len() {
            if k == sorted {
                let chunk = (4 * width).max(16).min(ext.len() - sorted);
                let rest = &mut ext[sorted..];
                if chunk < rest.len() {
                    rest.select_nth_unstable_by(chunk - 1, by);
                }
                rest[..chunk].sort_by(by);
                sorted += chunk;
            }
            let (score, h, tok) = ext[k];
            k += 1;
            let Some(cs) = con.extend(&live[h].cstate, tok) else { continue };
            used += 1;
            if tok == eos || (last && cfg.finish_at_max_len) {
                let mut tokens = live[h].tokens.clone();
                tokens.push(tok);
                finished.push(Hypothesis { tokens, score });
            } else if !last {
                next.push((h, tok, score, cs));
            }
        }
        if next.is_empty() {
            break;
        }
        finished.sort_by(by_score);
        // Scores never increase, so once the finished list is full and
        // beats every live hypothesis nothing can change the result.
        if finished.len() >= width {
            let worst = finished[width - 1].score;
            if next.iter().all(|n| n.2 <= worst) {
                break;
            }
        }
        let items: Vec<(&D::State, usize)> = next.iter().map(|&(k, tok, _, _)| (&live[k].dstate, tok)).collect();
        let advanced = dec.advance(&items);
        live = next
            .into_iter()
            .zip(advanced)
            .map(|((k, tok, score, cstate), (dstate, log_probs))| {
                let mut tokens = live[k].tokens.clone();
                tokens.push(tok);
                Live { tokens, score, dstate, cstate, log_probs }
            })
            .collect();
    }
    finished.sort_by(by_score);
    finished.truncate(width);
    finished
}
