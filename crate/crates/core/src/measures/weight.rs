//! Densities on the disk and their spec-string mini-language.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc as Shared;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::angle_of;

/// A piecewise-constant density sampled on a polar grid.
///
/// The value stored at `(r_i, theta_k)` holds on `[r_i, r_{i+1}) x
/// [theta_k, theta_{k+1})`; the last angular cell wraps around to the first
/// node and radii below `r_0` use the first row.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    radii: Vec<f64>,
    angles: Vec<f64>,
    values: Vec<f64>,
    source: String,
}

impl GridDensity {
    pub fn new(radii: Vec<f64>, angles: Vec<f64>, values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        let source = source.into();
        if values.len() != radii.len() * angles.len() {
            return Err(Error::GridFile(format!(
                "{} values for a {}x{} grid",
                values.len(),
                radii.len(),
                angles.len()
            )));
        }
        if radii.windows(2).any(|w| w[0] >= w[1]) || angles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::GridFile("radii and angles must be strictly increasing".into()));
        }
        if radii.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::GridFile("radii must lie in [0, 1)".into()));
        }
        if angles.iter().any(|t| !(0.0..std::f64::consts::TAU).contains(t)) {
            return Err(Error::GridFile("angles must lie in [0, 2π)".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::GridFile(format!("density {v} is not finite and nonnegative")));
        }
        Ok(GridDensity {
            radii,
            angles,
            values,
            source,
        })
    }

    /// A grid with no nodes; its density is zero everywhere.
    pub fn empty(source: impl Into<String>) -> Self {
        GridDensity {
            radii: Vec::new(),
            angles: Vec::new(),
            values: Vec::new(),
            source: source.into(),
        }
    }

    /// Samples `f(r, theta)` on a uniform `r_count x theta_count` grid.
    pub fn from_fn(r_count: usize, theta_count: usize, source: impl Into<String>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let radii: Vec<f64> = (0..r_count).map(|i| i as f64 / r_count as f64).collect();
        let angles: Vec<f64> = (0..theta_count)
            .map(|k| std::f64::consts::TAU * k as f64 / theta_count as f64)
            .collect();
        let mut values = Vec::with_capacity(r_count * theta_count);
        for &r in &radii {
            for &t in &angles {
                values.push(f(r, t));
            }
        }
        Self::new(radii, angles, values, source)
    }

    /// Parses the plain-text format: a header `r_count theta_count` followed by
    /// `r theta density` rows, radius-major.
    pub fn parse(text: &str, source: impl Into<String>) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next_num = |what: &str| -> Result<f64> {
            let tok = tokens
                .next()
                .ok_or_else(|| Error::GridFile(format!("unexpected end of file reading {what}")))?;
            tok.parse::<f64>()
                .map_err(|_| Error::GridFile(format!("cannot parse {what} `{tok}`")))
        };
        let r_count = next_num("r_count")?;
        let t_count = next_num("theta_count")?;
        if r_count < 0.0 || t_count < 0.0 || r_count.fract() != 0.0 || t_count.fract() != 0.0 {
            return Err(Error::GridFile("counts must be nonnegative integers".into()));
        }
        let (nr, nt) = (r_count as usize, t_count as usize);
        if nr == 0 || nt == 0 {
            return Ok(Self::empty(source));
        }
        let mut radii = Vec::with_capacity(nr);
        let mut angles = Vec::with_capacity(nt);
        let mut values = Vec::with_capacity(nr * nt);
        for i in 0..nr {
            for k in 0..nt {
                let r = next_num("r")?;
                let t = next_num("theta")?;
                let v = next_num("density")?;
                if k == 0 {
                    radii.push(r);
                } else if r != radii[i] {
                    return Err(Error::GridFile(format!("row {i} mixes radii {} and {r}", radii[i])));
                }
                if i == 0 {
                    angles.push(t);
                } else if t != angles[k] {
                    return Err(Error::GridFile(format!("column {k} mixes angles {} and {t}", angles[k])));
                }
                values.push(v);
            }
        }
        if tokens.next().is_some() {
            return Err(Error::GridFile("trailing data after the last row".into()));
        }
        Self::new(radii, angles, values, source)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::GridFile(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.radii.len(), self.angles.len());
        for (i, r) in self.radii.iter().enumerate() {
            for (k, t) in self.angles.iter().enumerate() {
                out.push_str(&format!("{r:e} {t:e} {:e}\n", self.values[i * self.angles.len() + k]));
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn value_at(&self, r: f64, theta: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let i = self.radii.partition_point(|&x| x <= r).saturating_sub(1);
        let k = match self.angles.partition_point(|&x| x <= theta) {
            0 => self.angles.len() - 1,
            k => k - 1,
        };
        self.values[i * self.angles.len() + k]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn powf(&self, exponent: f64) -> Self {
        GridDensity {
            values: self.values.iter().map(|v| v.powf(exponent)).collect(),
            source: format!("{}^{exponent}", self.source),
            ..self.clone()
        }
    }
}

/// A weight on the disk: a nonnegative density against normalized area.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Lebesgue,
    /// `(1 - |z|)^a`
    RadialPower(f64),
    Product(Box<Weight>, Box<Weight>),
    Sampled(Shared<GridDensity>),
}

impl Weight {
    pub fn product(a: Weight, b: Weight) -> Self {
        Weight::Product(Box::new(a), Box::new(b))
    }

    pub fn sampled(grid: GridDensity) -> Self {
        Weight::Sampled(Shared::new(grid))
    }

    pub fn density(&self, z: Complex64) -> f64 {
        self.radial_factor(z.norm()) * self.angular_factor(z)
    }

    /// Exponent `a` of the combined `(1 - r)^a` factor across all radial-power
    /// and Lebesgue factors.
    pub fn radial_exponent(&self) -> f64 {
        match self {
            Weight::Lebesgue | Weight::Sampled(_) => 0.0,
            Weight::RadialPower(a) => *a,
            Weight::Product(a, b) => a.radial_exponent() + b.radial_exponent(),
        }
    }

    /// True when the weight has no sampled factor, so box masses have closed forms.
    pub fn is_radial(&self) -> bool {
        match self {
            Weight::Lebesgue | Weight::RadialPower(_) => true,
            Weight::Sampled(_) => false,
            Weight::Product(a, b) => a.is_radial() && b.is_radial(),
        }
    }

    fn radial_factor(&self, r: f64) -> f64 {
        let a = self.radial_exponent();
        if a == 0.0 {
            1.0
        } else {
            (1.0 - r).powf(a)
        }
    }

    /// Product of the sampled factors at `z` (1 for radial weights).
    pub fn angular_factor(&self, z: Complex64) -> f64 {
        match self {
            Weight::Lebesgue | Weight::RadialPower(_) => 1.0,
            Weight::Sampled(g) => g.value_at(z.norm(), angle_of(z)),
            Weight::Product(a, b) => a.angular_factor(z) * b.angular_factor(z),
        }
    }

    /// Sampled factors are bounded, so finiteness is decided by the radial part.
    pub fn is_finite(&self) -> bool {
        self.radial_exponent() > -1.0
    }

    /// Positive almost everywhere, which is what forming a dual weight needs.
    pub fn is_strictly_positive(&self) -> bool {
        match self {
            Weight::Lebesgue | Weight::RadialPower(_) => true,
            Weight::Sampled(g) => !g.is_empty() && g.min_value() > 0.0,
            Weight::Product(a, b) => a.is_strictly_positive() && b.is_strictly_positive(),
        }
    }

    /// Mass of the annulus `r0 <= |z| < r1` with the sampled factors ignored:
    /// `2 ∫ (1 - r)^a r dr`.
    pub fn radial_mass(&self, r0: f64, r1: f64) -> f64 {
        radial_power_mass(self.radial_exponent(), r0, r1)
    }

    pub fn spec(&self) -> String {
        self.to_string()
    }
}

/// `2 ∫_{r0}^{r1} (1 - r)^a r dr`, infinite when `a <= -1` and `r1 = 1`.
pub fn radial_power_mass(a: f64, r0: f64, r1: f64) -> f64 {
    if r1 <= r0 {
        return 0.0;
    }
    if a == 0.0 {
        return r1 * r1 - r0 * r0;
    }
    // antiderivative in s = 1 - r of s^a (1 - s)
    let anti = |s: f64| -> f64 {
        if s <= 0.0 {
            if a > -1.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else if (a + 1.0).abs() < 1e-300 {
            s.ln() - s
        } else if (a + 2.0).abs() < 1e-300 {
            s.powf(a + 1.0) / (a + 1.0) - s.ln()
        } else {
            s.powf(a + 1.0) / (a + 1.0) - s.powf(a + 2.0) / (a + 2.0)
        }
    };
    2.0 * (anti(1.0 - r0) - anti(1.0 - r1))
}

/// `mu^(1 - p')` with `p' = p / (p - 1)`.
pub fn dual_weight(w: &Weight, p: f64) -> Result<Weight> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Argument(format!("dual exponent needs 1 < p < ∞, got {p}")));
    }
    if !w.is_strictly_positive() {
        return Err(Error::Domain(format!("cannot form the dual of `{w}`")));
    }
    let e = 1.0 - p / (p - 1.0);
    Ok(power_of(w, e))
}

fn power_of(w: &Weight, e: f64) -> Weight {
    match w {
        Weight::Lebesgue => Weight::Lebesgue,
        Weight::RadialPower(a) => {
            let b = a * e;
            if b == 0.0 {
                Weight::Lebesgue
            } else {
                Weight::RadialPower(b)
            }
        }
        Weight::Product(a, b) => Weight::product(power_of(a, e), power_of(b, e)),
        Weight::Sampled(g) => Weight::sampled(g.powf(e)),
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Lebesgue => f.write_str("lebesgue"),
            Weight::RadialPower(a) => write!(f, "radial-power:{a}"),
            Weight::Product(a, b) => write!(f, "product:{a},{b}"),
            Weight::Sampled(g) => write!(f, "grid:{}", g.source()),
        }
    }
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let bad = |reason: &str| Error::WeightSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let spec_t = spec.trim();
        if spec_t == "lebesgue" {
            return Ok(Weight::Lebesgue);
        }
        if let Some(rest) = spec_t.strip_prefix("radial-power:") {
            let a: f64 = rest.trim().parse().map_err(|_| bad("exponent is not a number"))?;
            if !a.is_finite() {
                return Err(bad("exponent is not finite"));
            }
            return Ok(Weight::RadialPower(a));
        }
        if let Some(rest) = spec_t.strip_prefix("product:") {
            for (i, _) in rest.match_indices(',') {
                if let (Ok(a), Ok(b)) = (rest[..i].parse::<Weight>(), rest[i + 1..].parse::<Weight>()) {
                    return Ok(Weight::product(a, b));
                }
            }
            return Err(bad("expected product:<spec>,<spec>"));
        }
        if let Some(rest) = spec_t.strip_prefix("grid:") {
            let grid = GridDensity::load(Path::new(rest.trim()))?;
            return Ok(Weight::sampled(grid));
        }
        Err(bad("unknown weight family"))
    }
}
