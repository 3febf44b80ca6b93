//! Built-in games with known equilibria and structure.
//!
//! Names returned by [`names`] are stable identifiers used by the CLI.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{invalid, Result};
use crate::game::{BoxSet, Game, JointPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    NonMonotone,
    StronglyMonotone,
    Potential,
    BoundaryEquilibrium,
    InteriorEquilibrium,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::NonMonotone => "non_monotone",
            Tag::StronglyMonotone => "strongly_monotone",
            Tag::Potential => "potential",
            Tag::BoundaryEquilibrium => "boundary_equilibrium",
            Tag::InteriorEquilibrium => "interior_equilibrium",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub game: Game,
    pub tags: BTreeSet<Tag>,
    /// How the stored SVS constant was obtained.
    pub svs_note: &'static str,
}

impl CatalogEntry {
    pub fn has_tag(&self, tag: Tag) -> bool {
        self.tags.contains(&tag)
    }
}

pub const EXAMPLE1_WIDE: &str = "example1_wide";
pub const EXAMPLE1_UNIT: &str = "example1_unit";
pub const EXAMPLE1_NEG: &str = "example1_neg";
pub const QUADRATIC: &str = "quadratic";
pub const BILINEAR: &str = "bilinear";

pub fn names() -> &'static [&'static str] {
    &[EXAMPLE1_WIDE, EXAMPLE1_UNIT, EXAMPLE1_NEG, QUADRATIC, BILINEAR]
}

pub fn by_name(name: &str) -> Result<CatalogEntry> {
    match name {
        EXAMPLE1_WIDE => Ok(example1_wide()),
        EXAMPLE1_UNIT => Ok(example1_unit()),
        EXAMPLE1_NEG => Ok(example1_neg()),
        QUADRATIC => Ok(quadratic()),
        BILINEAR => Ok(bilinear()),
        other => Err(invalid(format!(
            "unknown game {other:?}; known games: {}",
            names().join(", ")
        ))),
    }
}

fn equilibrium_tag(game: &Game) -> Tag {
    let eq = game.equilibrium().expect("catalog games carry an equilibrium");
    let on_boundary =
        (0..game.num_players()).any(|i| game.action_set(i).on_boundary(eq.block(i)));
    if on_boundary {
        Tag::BoundaryEquilibrium
    } else {
        Tag::InteriorEquilibrium
    }
}

/// Three players, scalar actions, `J^i(a) = a^1 a^2 a^3 + (a^i)^2`.
///
/// The pseudo-gradient `M(a) = (a^2 a^3 + 2a^1, a^1 a^3 + 2a^2, a^1 a^2 + 2a^3)`
/// vanishes at the origin, and `(M(a), a) = 3 a^1 a^2 a^3 + 2||a||^2 >=
/// ||a||^2 / 2` on `[-1, 2]^3`, so the origin is strongly variationally
/// stable with `ν = 1/2`. `M` is not monotone: its Jacobian has a negative
/// eigenvalue at `(2, 1, 2)`. The same `ν` is kept on sub-boxes, where the
/// inequality still holds because it is only required on a smaller set.
///
/// `bounds` is the per-player interval and must contain 0.
pub fn example1(bounds: &BoxSet) -> Result<CatalogEntry> {
    if bounds.dim() != 1 {
        return Err(invalid("example 1 has scalar actions; bounds must be an interval"));
    }
    if !bounds.contains(&[0.0]) {
        return Err(invalid(format!(
            "interval [{}, {}] does not contain the equilibrium 0",
            bounds.lower()[0],
            bounds.upper()[0]
        )));
    }
    let game = Game::new(vec![bounds.clone(); 3], |i, a| a[0] * a[1] * a[2] + a[i] * a[i])?
        .with_pseudo_gradient(|a, out| {
            out[0] = a[1] * a[2] + 2.0 * a[0];
            out[1] = a[0] * a[2] + 2.0 * a[1];
            out[2] = a[0] * a[1] + 2.0 * a[2];
        })
        .with_equilibrium(JointPoint::zeros(3, 1))?
        .with_svs_constant(0.5)?;
    let wide = bounds.lower()[0] == -1.0 && bounds.upper()[0] == 2.0;
    let name = match (bounds.lower()[0], bounds.upper()[0]) {
        _ if wide => EXAMPLE1_WIDE.to_string(),
        (lo, hi) if lo == 0.0 && hi == 1.0 => EXAMPLE1_UNIT.to_string(),
        (lo, hi) if lo == -1.0 && hi == 0.0 => EXAMPLE1_NEG.to_string(),
        (lo, hi) => format!("example1[{lo},{hi}]"),
    };
    let mut tags = BTreeSet::from([Tag::NonMonotone, Tag::Potential]);
    tags.insert(equilibrium_tag(&game));
    Ok(CatalogEntry {
        name,
        game,
        tags,
        svs_note: "ν = 1/2 from 3 a1 a2 a3 + 2||a||^2 >= ||a||^2/2 on [-1,2]^3; reused on sub-boxes",
    })
}

pub fn example1_wide() -> CatalogEntry {
    example1(&BoxSet::interval(-1.0, 2.0).unwrap()).unwrap()
}

pub fn example1_unit() -> CatalogEntry {
    example1(&BoxSet::interval(0.0, 1.0).unwrap()).unwrap()
}

pub fn example1_neg() -> CatalogEntry {
    example1(&BoxSet::interval(-1.0, 0.0).unwrap()).unwrap()
}

/// `J_i(a) = ||a^i - b_i||^2`, so `M(a) = 2(a - b)` and `b` is the
/// equilibrium.
///
/// `M` is strongly monotone with modulus 2, which makes the SVS gap with
/// `ν = 2` identically zero. The entry stores `ν = 1` instead so the sampled
/// SVS check has slack: the gap is then exactly `||a - b||^2`.
pub fn decoupled_quadratic(
    num_players: usize,
    dim: usize,
    targets: JointPoint,
    boxes: Vec<BoxSet>,
) -> Result<CatalogEntry> {
    if boxes.len() != num_players {
        return Err(invalid(format!(
            "{} boxes given for {num_players} players",
            boxes.len()
        )));
    }
    if targets.dim() != dim || targets.num_players() != num_players {
        return Err(invalid(format!(
            "targets have {} players x {} dims, expected {num_players} x {dim}",
            targets.num_players(),
            targets.dim()
        )));
    }
    let b = targets.as_slice().to_vec();
    let b_grad = b.clone();
    let game = Game::new(boxes, move |i, a| {
        let range = i * dim..(i + 1) * dim;
        a[range.clone()]
            .iter()
            .zip(&b[range])
            .map(|(x, t)| (x - t) * (x - t))
            .sum()
    })?
    .with_pseudo_gradient(move |a, out| {
        for ((o, x), t) in out.iter_mut().zip(a).zip(&b_grad) {
            *o = 2.0 * (x - t);
        }
    })
    .with_equilibrium(targets)?
    .with_svs_constant(1.0)?;
    let mut tags = BTreeSet::from([Tag::StronglyMonotone, Tag::Potential]);
    tags.insert(equilibrium_tag(&game));
    Ok(CatalogEntry {
        name: QUADRATIC.to_string(),
        game,
        tags,
        svs_note: "strong monotonicity modulus 2; ν = 1 stored to leave slack",
    })
}

/// The `quadratic` entry: 3 players in `[-1, 1]^2` with interior targets.
pub fn quadratic() -> CatalogEntry {
    let targets = JointPoint::new(vec![0.5, -0.25, 0.0, 0.75, -0.5, 0.25], 2).unwrap();
    decoupled_quadratic(3, 2, targets, vec![BoxSet::cube(2, -1.0, 1.0).unwrap(); 3]).unwrap()
}

/// Stored SVS bound for [`bilinear_coupling`]: `2 - (N - 1)|coupling|`.
///
/// The Jacobian of `M` is `2I + coupling (11^T - I)`. By Gershgorin every
/// eigenvalue is at least `2 - (N - 1)|coupling|`, so `M` is strongly
/// monotone with that modulus whenever it is positive. (The exact minimum
/// eigenvalue is `2 - |coupling|` for `N >= 2` with positive coupling; the
/// Gershgorin value is the conservative one stored.)
pub fn bilinear_svs_bound(num_players: usize, coupling: f64) -> f64 {
    2.0 - (num_players.saturating_sub(1)) as f64 * coupling.abs()
}

/// `J_i(a) = (a^i)^2 + coupling * a^i * sum_{j != i} a^j` with scalar
/// actions; equilibrium at the origin.
pub fn bilinear_coupling(num_players: usize, coupling: f64, boxes: Vec<BoxSet>) -> Result<CatalogEntry> {
    if boxes.len() != num_players {
        return Err(invalid(format!(
            "{} boxes given for {num_players} players",
            boxes.len()
        )));
    }
    if boxes.iter().any(|b| b.dim() != 1) {
        return Err(invalid("bilinear game has scalar actions"));
    }
    let nu = bilinear_svs_bound(num_players, coupling);
    if nu.is_nan() || nu <= 0.0 {
        return Err(invalid(format!(
            "coupling {coupling} with {num_players} players gives SVS bound {nu} <= 0"
        )));
    }
    let game = Game::new(boxes, move |i, a| {
        let others: f64 = a.iter().sum::<f64>() - a[i];
        a[i] * a[i] + coupling * a[i] * others
    })?
    .with_pseudo_gradient(move |a, out| {
        let total: f64 = a.iter().sum();
        for (o, x) in out.iter_mut().zip(a) {
            *o = 2.0 * x + coupling * (total - x);
        }
    })
    .with_equilibrium(JointPoint::zeros(num_players, 1))?
    .with_svs_constant(nu)?;
    let mut tags = BTreeSet::from([Tag::StronglyMonotone, Tag::Potential]);
    tags.insert(equilibrium_tag(&game));
    Ok(CatalogEntry {
        name: BILINEAR.to_string(),
        game,
        tags,
        svs_note: "ν = 2 - (N-1)|coupling| (Gershgorin bound on the symmetric Jacobian)",
    })
}

/// The `bilinear` entry: 3 players on `[-1, 1]`, coupling 0.5, `ν = 1`.
pub fn bilinear() -> CatalogEntry {
    bilinear_coupling(3, 0.5, vec![BoxSet::interval(-1.0, 1.0).unwrap(); 3]).unwrap()
}
