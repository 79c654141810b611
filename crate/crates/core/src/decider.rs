//! Decision table for nontrivial multipliers between two meromorphic inner
//! functions `U = S^a B1`, `V = S^b B2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::density::{estimate_density_bracket, DensityBracket, DiscreteSequence};
use crate::error::Result;
use crate::inner::{derivative_modulus_with_bounds, InnerFunctionSpec, TruncationSchedule};
use crate::toeplitz::{kernel_triviality_probe, ProbeConfig, ProbeReport, ProbeVerdict, ToeplitzSymbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairShape {
    PureSingular,
    FiniteBlaschkeBoth,
    InfiniteBlaschkeVsSingular,
    SingularVsInfiniteBlaschke,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MifPair {
    #[serde(rename = "U")]
    pub u: InnerFunctionSpec,
    #[serde(rename = "V")]
    pub v: InnerFunctionSpec,
}

impl MifPair {
    pub fn new(u: InnerFunctionSpec, v: InnerFunctionSpec) -> Result<Self> {
        u.validate()?;
        v.validate()?;
        Ok(Self { u, v })
    }

    pub fn shape(&self) -> PairShape {
        let (bu, bv) = (&self.u.blaschke, &self.v.blaschke);
        match (bu.is_empty(), bv.is_empty(), bu.is_infinite(), bv.is_infinite()) {
            (true, true, _, _) => PairShape::PureSingular,
            (_, _, false, false) => PairShape::FiniteBlaschkeBoth,
            (false, true, true, _) => PairShape::InfiniteBlaschkeVsSingular,
            (true, false, _, true) => PairShape::SingularVsInfiniteBlaschke,
            _ => PairShape::Other,
        }
    }

    /// The symbol `U conj(V)` whose Toeplitz kernel mirrors the multiplier set.
    pub fn symbol(&self) -> ToeplitzSymbol {
        ToeplitzSymbol::ratio(self.u.clone(), self.v.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MVerdict {
    NotInTildeL1,
    Unknown,
}

/// Growth of `m = arg U - arg(V b_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MClassification {
    pub linear_coefficient: f64,
    pub bounded_remainder: bool,
    pub verdict: MVerdict,
}

pub fn classify_m(pair: &MifPair) -> MClassification {
    let linear_coefficient = pair.u.mass - pair.v.mass;
    let bounded_remainder = !pair.u.blaschke.is_infinite() && !pair.v.blaschke.is_infinite();
    let verdict = if linear_coefficient != 0.0 && bounded_remainder { MVerdict::NotInTildeL1 } else { MVerdict::Unknown };
    MClassification { linear_coefficient, bounded_remainder, verdict }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub pass: bool,
    pub observed: (f64, f64),
    pub band: (f64, f64),
    pub grid: (f64, f64, usize),
    /// True when the behaviour off the grid follows from the shape of the zero set.
    pub tail_certified: bool,
    pub caveat: Option<String>,
}

/// Tests `c1 <= |U'| <= c2` on a grid covering at least `[-50, 50]`.
pub fn check_derivative_hypothesis(
    u: &InnerFunctionSpec,
    grid: &[f64],
    band: (f64, f64),
    schedule: &TruncationSchedule,
) -> Result<DerivativeCheck> {
    let (lo, hi) = match (grid.first(), grid.last()) {
        (Some(l), Some(h)) => (*l, *h),
        _ => return Err(crate::Error::InvalidInput("empty derivative grid".into())),
    };
    if lo > -50.0 || hi < 50.0 {
        return Err(crate::Error::InvalidInput(format!("derivative grid must cover [-50, 50], got [{lo}, {hi}]")));
    }
    let vals = derivative_modulus_with_bounds(u, grid, schedule)?;
    let min = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    let max = vals.iter().map(|v| v.0 + v.1).fold(0.0, f64::max);
    let pass = band.0 <= min && max <= band.1;
    let periodic = u.blaschke.family().is_some_and(|f| f.is_two_sided_infinite());
    let tail_certified = u.blaschke.is_empty() || periodic;
    let caveat = (!tail_certified).then(|| "grid evidence only: behaviour beyond the grid is assumed".to_string());
    Ok(DerivativeCheck { pass, observed: (min, max), band, grid: (lo, hi, grid.len()), tail_certified, caveat })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecideConfig {
    /// Absolute tolerance for equality of masses and thresholds.
    pub tau: f64,
    pub derivative_band: (f64, f64),
    pub derivative_half_width: f64,
    pub derivative_step: f64,
    pub schedule: TruncationSchedule,
}

impl Default for DecideConfig {
    fn default() -> Self {
        Self {
            tau: 1e-12,
            derivative_band: (1e-2, 1e2),
            derivative_half_width: 50.0,
            derivative_step: 0.125,
            schedule: TruncationSchedule::default(),
        }
    }
}

impl DecideConfig {
    fn grid(&self) -> Vec<f64> {
        let n = (2.0 * self.derivative_half_width / self.derivative_step).round() as usize;
        (0..=n).map(|k| -self.derivative_half_width + k as f64 * self.derivative_step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Nontrivial,
    Trivial,
    UndecidedBoundary,
    OutOfScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// `U = S^a`, `V = S^b`
    SingularMasses,
    /// Both Blaschke parts finite, `a != b`
    FiniteBlaschkeMasses,
    /// `U = S^a B` with infinitely many zeros, `V = S^b`
    UpperDensityExcess,
    /// `U = S^a`, `V = S^b B` with infinitely many zeros
    LowerDensityExcess,
    /// `U = S^a`, `V = B` over the lattice `n + i`
    LatticeThreshold,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisChecks {
    pub derivative_band: Option<DerivativeCheck>,
    pub m_classification: MClassification,
    pub densities: Vec<DensityBracket>,
    /// Hypotheses taken as given rather than checked.
    pub assumed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericInputs {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "D")]
    pub density: Option<f64>,
    pub two_pi_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionCertificate {
    pub shape: PairShape,
    pub verdict: Verdict,
    pub rule: Rule,
    pub inputs: NumericInputs,
    pub hypothesis_checks: HypothesisChecks,
    pub narrative: String,
    pub citations: Vec<String>,
    pub diagnostics: Vec<String>,
}

impl DecisionCertificate {
    pub fn is_definite(&self) -> bool {
        matches!(self.verdict, Verdict::Nontrivial | Verdict::Trivial)
    }
}

/// Statement each rule relies on.
pub fn rule_statement(rule: Rule) -> &'static str {
    match rule {
        Rule::SingularMasses => "M(S^a, S^b) != {0} iff b >= a; for b = a constants are multipliers",
        Rule::FiniteBlaschkeMasses => {
            "for finite Blaschke products B1, B2 and a != b: M(S^a B1, S^b B2) != {0} iff b > a"
        }
        Rule::UpperDensityExcess => {
            "for |U'| bounded above and below, a >= 0, b > 0 and b - a != 2 pi D: \
             M(S^a B_L, S^b) != {0} iff b - a > 2 pi D, with D the upper density of L"
        }
        Rule::LowerDensityExcess => {
            "for a > 0 and a - b != 2 pi D: M(S^a, S^b B_L) != {0} iff a - b < 2 pi D, \
             with D the lower density of L"
        }
        Rule::LatticeThreshold => "M(S^a, B_L) != {0} iff a < 2 pi for L = {n + i : n in Z}",
        Rule::None => "no rule applies",
    }
}

fn compare(x: f64, y: f64, tau: f64) -> std::cmp::Ordering {
    if (x - y).abs() <= tau {
        std::cmp::Ordering::Equal
    } else {
        x.total_cmp(&y)
    }
}

fn family_density(spec: &InnerFunctionSpec) -> Result<(Option<f64>, DensityBracket, Vec<String>)> {
    let f = spec.blaschke.family().expect("infinite zero sets are families");
    let est = estimate_density_bracket(&DiscreteSequence::from_family(f)?, None, None)?;
    Ok((est.bracket.exact_value(), est.bracket, est.diagnostics))
}

fn is_unit_lattice(spec: &InnerFunctionSpec) -> bool {
    spec.mass == 0.0
        && spec.blaschke.family().is_some_and(|f| f.is_two_sided_infinite() && f.alpha.abs() == 1.0 && f.beta == 1.0)
}

/// Applies the single row of the decision table that matches the pair.
pub fn decide_multipliers(pair: &MifPair, cfg: &DecideConfig) -> Result<DecisionCertificate> {
    pair.u.validate()?;
    pair.v.validate()?;
    let shape = pair.shape();
    let (a, b) = (pair.u.mass, pair.v.mass);
    let mut cert = DecisionCertificate {
        shape,
        verdict: Verdict::OutOfScope,
        rule: Rule::None,
        inputs: NumericInputs { a, b, density: None, two_pi_d: None },
        hypothesis_checks: HypothesisChecks {
            derivative_band: None,
            m_classification: classify_m(pair),
            densities: Vec::new(),
            assumed: Vec::new(),
        },
        narrative: String::new(),
        citations: Vec::new(),
        diagnostics: Vec::new(),
    };
    let tau = cfg.tau;
    use std::cmp::Ordering::*;
    match shape {
        PairShape::PureSingular => {
            cert.rule = Rule::SingularMasses;
            cert.verdict = if compare(b, a, tau) != Less { Verdict::Nontrivial } else { Verdict::Trivial };
        }
        PairShape::FiniteBlaschkeBoth => {
            cert.rule = Rule::FiniteBlaschkeMasses;
            cert.verdict = match compare(b, a, tau) {
                Greater => Verdict::Nontrivial,
                Less => Verdict::Trivial,
                Equal => {
                    cert.diagnostics.push("equal masses are excluded by the finite Blaschke rule".into());
                    Verdict::OutOfScope
                }
            };
        }
        PairShape::InfiniteBlaschkeVsSingular => {
            cert.rule = Rule::UpperDensityExcess;
            let check = check_derivative_hypothesis(&pair.u, &cfg.grid(), cfg.derivative_band, &cfg.schedule)?;
            let passed = check.pass;
            if let Some(c) = &check.caveat {
                cert.diagnostics.push(c.clone());
            }
            cert.hypothesis_checks.derivative_band = Some(check);
            cert.hypothesis_checks.assumed.push("|U'| bounded above and below on the whole line".into());
            let (d, bracket, diag) = family_density(&pair.u)?;
            cert.hypothesis_checks.densities.push(bracket);
            cert.diagnostics.extend(diag);
            cert.verdict = if b <= 0.0 {
                cert.diagnostics.push("the density rule needs b > 0".into());
                Verdict::OutOfScope
            } else if !passed {
                cert.diagnostics.push("|U'| left the configured band on the grid".into());
                Verdict::OutOfScope
            } else {
                threshold_verdict(&mut cert, d, b - a, true, tau)
            };
        }
        PairShape::SingularVsInfiniteBlaschke => {
            cert.rule = if is_unit_lattice(&pair.v) { Rule::LatticeThreshold } else { Rule::LowerDensityExcess };
            let (d, bracket, diag) = family_density(&pair.v)?;
            cert.hypothesis_checks.densities.push(bracket);
            cert.diagnostics.extend(diag);
            cert.verdict = if a <= 0.0 {
                cert.diagnostics.push("the density rule needs a > 0".into());
                Verdict::OutOfScope
            } else {
                threshold_verdict(&mut cert, d, a - b, false, tau)
            };
        }
        PairShape::Other => {
            cert.diagnostics.push("pair is outside the decision table; run the kernel probe for numerical evidence".into());
        }
    }
    if cert.verdict == Verdict::OutOfScope && shape != PairShape::Other && cert.rule != Rule::None {
        cert.narrative = format!("{:?} pair, but the hypotheses of the rule are not met: {}", shape, cert.diagnostics.join("; "));
    } else {
        cert.narrative = match cert.rule {
            Rule::None => "no rule of the decision table applies".into(),
            r => format!("{:?} by the rule: {}", cert.verdict, rule_statement(r)),
        };
    }
    if cert.rule != Rule::None {
        cert.citations.push(rule_statement(cert.rule).to_string());
    }
    if !cert.hypothesis_checks.densities.is_empty() {
        cert.citations.push("a two-sided progression {alpha n + i beta : n in Z} has lower and upper density 1/|alpha|".into());
    }
    Ok(cert)
}

/// `excess > 2 pi D` means nontrivial when `upper` is set, trivial otherwise.
fn threshold_verdict(cert: &mut DecisionCertificate, d: Option<f64>, excess: f64, upper: bool, tau: f64) -> Verdict {
    let Some(d) = d else {
        cert.diagnostics.push("density bracket is not exact; decision refused".into());
        return Verdict::OutOfScope;
    };
    let t = 2.0 * PI * d;
    cert.inputs.density = Some(d);
    cert.inputs.two_pi_d = Some(t);
    match (compare(excess, t, tau), upper) {
        (std::cmp::Ordering::Equal, _) => Verdict::UndecidedBoundary,
        (std::cmp::Ordering::Greater, true) | (std::cmp::Ordering::Less, false) => Verdict::Nontrivial,
        _ => Verdict::Trivial,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Agreement {
    Agree,
    Disagree,
    Inconclusive,
    /// The certificate makes no claim to compare with.
    AdvisoryOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub certificate_verdict: Verdict,
    pub probe: ProbeReport,
    pub agreement: Agreement,
}

/// Runs the kernel probe on `U conj(V)` and compares it with the certificate.
/// A disagreement is flagged, never used to override the certificate.
pub fn cross_validate(pair: &MifPair, cert: &DecisionCertificate, cfg: &ProbeConfig) -> Result<ConsistencyReport> {
    let probe = kernel_triviality_probe(&pair.symbol(), cfg)?;
    let agreement = match (cert.verdict, probe.verdict) {
        (Verdict::UndecidedBoundary | Verdict::OutOfScope, _) => Agreement::AdvisoryOnly,
        (_, ProbeVerdict::Inconclusive) => Agreement::Inconclusive,
        (Verdict::Nontrivial, ProbeVerdict::LikelyNontrivial) | (Verdict::Trivial, ProbeVerdict::LikelyTrivial) => {
            Agreement::Agree
        }
        _ => Agreement::Disagree,
    };
    Ok(ConsistencyReport { certificate_verdict: cert.verdict, probe, agreement })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::C64;
    use crate::inner::ArithFamily;

    fn s(a: f64) -> InnerFunctionSpec {
        InnerFunctionSpec::singular(a)
    }

    fn lattice(mass: f64) -> InnerFunctionSpec {
        InnerFunctionSpec::arith(mass, ArithFamily::two_sided(1.0, 1.0)).unwrap()
    }

    fn decide(u: InnerFunctionSpec, v: InnerFunctionSpec) -> DecisionCertificate {
        decide_multipliers(&MifPair::new(u, v).unwrap(), &DecideConfig::default()).unwrap()
    }

    #[test]
    fn shapes() {
        let fb = InnerFunctionSpec::blaschke(vec![C64::new(0.0, 2.0)]).unwrap();
        assert_eq!(MifPair::new(s(1.0), s(2.0)).unwrap().shape(), PairShape::PureSingular);
        assert_eq!(MifPair::new(fb.clone(), s(2.0)).unwrap().shape(), PairShape::FiniteBlaschkeBoth);
        assert_eq!(MifPair::new(lattice(1.0), s(2.0)).unwrap().shape(), PairShape::InfiniteBlaschkeVsSingular);
        assert_eq!(MifPair::new(s(1.0), lattice(0.0)).unwrap().shape(), PairShape::SingularVsInfiniteBlaschke);
        assert_eq!(MifPair::new(lattice(1.0), lattice(0.0)).unwrap().shape(), PairShape::Other);
        assert_eq!(MifPair::new(lattice(1.0), fb).unwrap().shape(), PairShape::Other);
    }

    #[test]
    fn classify_examples() {
        let m = classify_m(&MifPair::new(s(2.0), s(1.0)).unwrap());
        assert_eq!((m.linear_coefficient, m.verdict), (1.0, MVerdict::NotInTildeL1));
        let fb = InnerFunctionSpec::arith(1.0, ArithFamily { alpha: 1.0, beta: 1.0, nmin: Some(-2), nmax: Some(2) }).unwrap();
        assert_eq!(classify_m(&MifPair::new(fb.clone(), fb).unwrap()).verdict, MVerdict::Unknown);
        let m = classify_m(&MifPair::new(lattice(1.0), s(3.0)).unwrap());
        assert_eq!((m.linear_coefficient, m.bounded_remainder, m.verdict), (-2.0, false, MVerdict::Unknown));
    }

    #[test]
    fn lattice_threshold() {
        let c = decide(s(PI), lattice(0.0));
        assert_eq!((c.verdict, c.rule), (Verdict::Nontrivial, Rule::LatticeThreshold));
        assert_eq!(decide(s(7.0), lattice(0.0)).verdict, Verdict::Trivial);
    }

    #[test]
    fn upper_density_boundary() {
        let c = decide(lattice(1.0), s(1.0 + 2.0 * PI));
        assert_eq!((c.verdict, c.rule), (Verdict::UndecidedBoundary, Rule::UpperDensityExcess));
        assert!(c.hypothesis_checks.derivative_band.as_ref().unwrap().pass);
        assert_eq!(decide(lattice(1.0), s(1.0 + 2.0 * PI + 1e-6)).verdict, Verdict::Nontrivial);
        assert_eq!(decide(lattice(1.0), s(1.0 + 2.0 * PI - 1e-6)).verdict, Verdict::Trivial);
        assert_eq!(decide(lattice(0.0), s(0.0)).verdict, Verdict::OutOfScope);
    }

    #[test]
    fn derivative_hypothesis_examples() {
        let grid: Vec<f64> = (0..=1000).map(|k| -50.0 + 0.1 * k as f64).collect();
        let sched = TruncationSchedule::default();
        let c = check_derivative_hypothesis(&s(1.0), &grid, (0.5, 2.0), &sched).unwrap();
        assert!(c.pass && c.observed == (1.0, 1.0));
        let c = check_derivative_hypothesis(&lattice(0.0), &grid, (1e-2, 1e2), &sched).unwrap();
        assert!(c.pass && c.tail_certified);
        // oracle: the lattice sum is 2 pi sinh(2 pi)/(cosh(2 pi) - cos(2 pi x))
        let f = |x: f64| 2.0 * PI * (2.0 * PI).sinh() / ((2.0 * PI).cosh() - (2.0 * PI * x).cos());
        // the upper end carries the truncation bound of the omitted zeros
        assert!((c.observed.0 - f(0.5)).abs() < 1e-3, "{:?}", c.observed);
        assert!(c.observed.1 >= f(0.0) - 1e-3 && c.observed.1 <= f(0.0) + 2e-2, "{:?}", c.observed);
        let d = 1e-3;
        let narrow = InnerFunctionSpec::blaschke(vec![C64::new(0.0, d)]).unwrap();
        let c = check_derivative_hypothesis(&narrow, &grid, (1e-2, 1e2), &sched).unwrap();
        assert!(!c.pass && (c.observed.1 - 2.0 / d).abs() < 1e-6 && c.caveat.is_some());
    }

    #[test]
    fn unimodular_constant_is_irrelevant() {
        let c = C64::from_polar(1.0, 0.7);
        for (u, v) in [(s(1.0), s(2.0)), (s(PI), lattice(0.0)), (lattice(1.0), s(9.0))] {
            let base = decide(u.clone(), v.clone()).verdict;
            assert_eq!(decide(u.with_constant(c), v.with_constant(c.conj())).verdict, base);
        }
    }
}
