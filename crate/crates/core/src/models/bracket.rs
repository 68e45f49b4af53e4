use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::field::{fd_bracket, fd_step, VectorField, FD_BASE_STEP};
use super::point::Point;
use super::system::{Backend, VectorFieldSystem};
use super::ModelError;

/// Relative singular-value threshold for numerical rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// A left-normed bracket of diffusion fields, e.g. `[[1,2],1]`.
/// Indices are 1-based to match `X_1 … X_m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BracketWord {
    Field(usize),
    Bracket(Box<BracketWord>, Box<BracketWord>),
}

impl BracketWord {
    pub fn level(&self) -> usize {
        match self {
            BracketWord::Field(_) => 1,
            BracketWord::Bracket(a, b) => a.level() + b.level(),
        }
    }

    pub fn bracket(a: BracketWord, b: BracketWord) -> BracketWord {
        BracketWord::Bracket(Box::new(a), Box::new(b))
    }
}

impl fmt::Display for BracketWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BracketWord::Field(i) => write!(f, "{i}"),
            BracketWord::Bracket(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

/// Left-normed words up to `max_level`, grouped by level: `D_k` is the
/// union of the first `k` groups.
pub fn words_up_to(m: usize, max_level: usize) -> Vec<Vec<BracketWord>> {
    let mut levels: Vec<Vec<BracketWord>> = vec![(1..=m).map(BracketWord::Field).collect()];
    for level in 2..=max_level {
        let prev = &levels[level - 2];
        let mut next = Vec::new();
        for w in prev {
            for i in 1..=m {
                // [i,j] and [j,i] span the same line, and [i,i] = 0
                if let BracketWord::Field(j) = w {
                    if *j >= i {
                        continue;
                    }
                }
                next.push(BracketWord::bracket(w.clone(), BracketWord::Field(i)));
            }
        }
        levels.push(next);
    }
    levels
}

/// Bracket evaluators keyed by word, built symbolically where possible.
#[derive(Clone, Debug)]
pub struct BracketTable {
    pub entries: Vec<(BracketWord, Option<VectorField>)>,
    pub max_level: usize,
}

impl BracketTable {
    pub fn build(sys: &VectorFieldSystem, max_level: usize) -> Self {
        let levels = words_up_to(sys.diffusion_count(), max_level);
        let mut entries: Vec<(BracketWord, Option<VectorField>)> = Vec::new();
        for w in levels.into_iter().flatten() {
            let f = symbolic_word(sys, &w);
            entries.push((w, f));
        }
        BracketTable { entries, max_level }
    }

    pub fn get(&self, w: &BracketWord) -> Option<&VectorField> {
        self.entries
            .iter()
            .find(|(k, _)| k == w)
            .and_then(|(_, f)| f.as_ref())
    }

    /// Value of word `w` at `x` with the requested backend; falls back to
    /// finite differences when no symbolic form exists.
    pub fn eval(
        &self,
        sys: &VectorFieldSystem,
        w: &BracketWord,
        x: &Point,
        backend: Backend,
    ) -> Result<Point, ModelError> {
        let v = match (backend, self.get(w)) {
            (Backend::Symbolic, Some(f)) => f.eval(x),
            _ => eval_word_fd(sys, w, x, FD_BASE_STEP),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::NonFinite { at: *x })
        }
    }
}

fn symbolic_word(sys: &VectorFieldSystem, w: &BracketWord) -> Option<VectorField> {
    match w {
        BracketWord::Field(i) => sys.diffusion.get(i - 1).cloned(),
        BracketWord::Bracket(a, b) => {
            let fa = symbolic_word(sys, a)?;
            let fb = symbolic_word(sys, b)?;
            fa.symbolic_bracket(&fb)
        }
    }
}

/// Nested central differences; the step grows with nesting depth to keep
/// round-off below truncation error.
pub fn eval_word_fd(sys: &VectorFieldSystem, w: &BracketWord, x: &Point, base: f64) -> Point {
    match w {
        BracketWord::Field(i) => sys.diffusion[i - 1].eval(x),
        BracketWord::Bracket(a, b) => {
            let h = fd_step(base * 10f64.powi(w.level() as i32 - 2), x);
            fd_bracket(
                |p| eval_word_fd(sys, a, p, base),
                |p| eval_word_fd(sys, b, p, base),
                x,
                h,
            )
        }
    }
}

/// `[X, Y](x)`.
pub fn lie_bracket(
    x_field: &VectorField,
    y_field: &VectorField,
    at: &Point,
    backend: Backend,
) -> Result<Point, ModelError> {
    lie_bracket_with_step(x_field, y_field, at, backend, FD_BASE_STEP)
}

/// As [`lie_bracket`], with an explicit relative finite-difference step.
pub fn lie_bracket_with_step(
    x_field: &VectorField,
    y_field: &VectorField,
    at: &Point,
    backend: Backend,
    base_step: f64,
) -> Result<Point, ModelError> {
    let sym = match backend {
        Backend::Symbolic => x_field.symbolic_bracket(y_field),
        Backend::FiniteDifference => None,
    };
    let v = match sym {
        Some(f) => f.eval(at),
        None => {
            let h = fd_step(base_step, at);
            for p in [*at, at.axpy(h, &Point::basis(at.dim(), 0))] {
                if !x_field.eval(&p).is_finite() || !y_field.eval(&p).is_finite() {
                    return Err(ModelError::NonFinite { at: p });
                }
            }
            fd_bracket(|p| x_field.eval(p), |p| y_field.eval(p), at, h)
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::NonFinite { at: *at })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HormanderLevel {
    Spanned(usize),
    NotSpanned,
}

impl HormanderLevel {
    pub fn level(&self) -> Option<usize> {
        match self {
            HormanderLevel::Spanned(k) => Some(*k),
            HormanderLevel::NotSpanned => None,
        }
    }
}

/// Numerical rank of a set of vectors with threshold relative to the
/// largest singular value.
pub fn numerical_rank(vectors: &[Point], dim: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]);
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > RANK_TOLERANCE * smax).count()
}

/// Smallest `k ≤ max_level` such that `D_k` spans the tangent space at `x`.
pub fn hormander_level(
    sys: &VectorFieldSystem,
    x: &Point,
    max_level: usize,
) -> Result<HormanderLevel, ModelError> {
    hormander_level_with(sys, &BracketTable::build(sys, max_level), x, Backend::Symbolic)
}

/// As [`hormander_level`] with a prebuilt table and explicit backend.
pub fn hormander_level_with(
    sys: &VectorFieldSystem,
    table: &BracketTable,
    x: &Point,
    backend: Backend,
) -> Result<HormanderLevel, ModelError> {
    if table.max_level < 1 {
        return Err(ModelError::Invalid("max_level must be at least 1".into()));
    }
    let dim = sys.dim();
    let mut vectors = Vec::new();
    for level in 1..=table.max_level {
        for (w, _) in table.entries.iter().filter(|(w, _)| w.level() == level) {
            vectors.push(table.eval(sys, w, x, backend)?);
        }
        if numerical_rank(&vectors, dim) == dim {
            return Ok(HormanderLevel::Spanned(level));
        }
    }
    Ok(HormanderLevel::NotSpanned)
}
