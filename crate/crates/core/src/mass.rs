//! Mass partitions, their bivariate refinement, and the full parameter set of
//! a simple nested fragmentation: three erosion coefficients plus finite-atom
//! outer and inner dislocation measures.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack for every ≤ constraint on frequencies; user-supplied decimals like
/// 0.1 + 0.2 rarely sum exactly.
pub const MASS_TOL: f64 = 1e-9;

fn approx(a: f64, b: f64) -> bool {
    (a - b).abs() <= MASS_TOL
}

/// Validate one frequency: finite and not materially negative. Values in
/// [-MASS_TOL, 0) are clamped to zero.
fn clean_entry(x: f64, what: &str) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Negative(format!("{what}: non-finite entry {x}")));
    }
    if x < -MASS_TOL {
        return Err(Error::Negative(format!("{what}: entry {x}")));
    }
    Ok(x.max(0.0))
}

/// Clean, sort descending, drop zeros.
fn clean_masses(raw: &[f64], what: &str) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(raw.len());
    for &x in raw {
        let x = clean_entry(x, what)?;
        if x > 0.0 {
            v.push(x);
        }
    }
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(v)
}

/// Rows compared entrywise with implicit zero padding, larger entries first.
fn row_lex_desc(a: &[f64], b: &[f64]) -> Ordering {
    for i in 0..a.len().max(b.len()) {
        let x = a.get(i).copied().unwrap_or(0.0);
        let y = b.get(i).copied().unwrap_or(0.0);
        match y.partial_cmp(&x).unwrap() {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Nonincreasing frequencies with total at most 1; the deficit is dust.
#[derive(Clone, Debug, PartialEq)]
pub struct MassPartition {
    s: Vec<f64>,
}

pub fn validate_mass(raw: &[f64]) -> Result<MassPartition> {
    let s = clean_masses(raw, "mass partition")?;
    let total: f64 = s.iter().sum();
    if total > 1.0 + MASS_TOL {
        return Err(Error::SumExceedsOne(total));
    }
    Ok(MassPartition { s })
}

impl MassPartition {
    pub fn parts(&self) -> &[f64] {
        &self.s
    }

    pub fn dust(&self) -> f64 {
        (1.0 - self.s.iter().sum::<f64>()).max(0.0)
    }

    /// The trivial atom s = (1): paintboxes drawn from it never split.
    pub fn is_identity(&self) -> bool {
        self.s.len() == 1 && approx(self.s[0], 1.0)
    }
}

/// How a fragmenting inner block distributes its children: pieces staying in
/// the mother outer block (`u`, total frequency `u_bar`), pieces moving into
/// new outer block k (`s_rows[k]`, block frequency `s_bar[k]`), with dust at
/// all three levels.
#[derive(Clone, Debug, PartialEq)]
pub struct BivariateMassPartition {
    u: Vec<f64>,
    s_rows: Vec<Vec<f64>>,
    u_bar: f64,
    s_bar: Vec<f64>,
}

pub fn canonicalize_bivariate(
    u: Vec<f64>,
    s_rows: Vec<Vec<f64>>,
    u_bar: f64,
    s_bar: Vec<f64>,
) -> Result<BivariateMassPartition> {
    let u_bar = clean_entry(u_bar, "u_bar")?;
    let u = clean_masses(&u, "u")?;
    let su: f64 = u.iter().sum();
    if su > u_bar + MASS_TOL {
        return Err(Error::RowSumExceedsBar(format!(
            "sum(u) = {su} > u_bar = {u_bar}"
        )));
    }

    // Rows beyond s_bar get bar 0; bars beyond s_rows get an empty row.
    let k = s_rows.len().max(s_bar.len());
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
    for i in 0..k {
        let bar = clean_entry(s_bar.get(i).copied().unwrap_or(0.0), "s_bar")?;
        let row = clean_masses(s_rows.get(i).map_or(&[][..], |r| r), "s row")?;
        let sr: f64 = row.iter().sum();
        if sr > bar + MASS_TOL {
            return Err(Error::RowSumExceedsBar(format!(
                "row {}: sum = {sr} > s_bar = {bar}",
                i + 1
            )));
        }
        if bar > 0.0 {
            pairs.push((bar, row));
        }
    }
    pairs.sort_by(|a, b| match b.0.partial_cmp(&a.0).unwrap() {
        Ordering::Equal => row_lex_desc(&a.1, &b.1),
        o => o,
    });

    let total = u_bar + pairs.iter().map(|p| p.0).sum::<f64>();
    if total > 1.0 + MASS_TOL {
        return Err(Error::TotalExceedsOne(total));
    }

    let (s_bar, s_rows) = pairs.into_iter().unzip();
    Ok(BivariateMassPartition {
        u,
        s_rows,
        u_bar,
        s_bar,
    })
}

impl BivariateMassPartition {
    /// The distinguished element 1: everything stays with the mother.
    pub fn one() -> BivariateMassPartition {
        BivariateMassPartition {
            u: vec![1.0],
            s_rows: Vec::new(),
            u_bar: 1.0,
            s_bar: Vec::new(),
        }
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn u_bar(&self) -> f64 {
        self.u_bar
    }

    pub fn s_bar(&self) -> &[f64] {
        &self.s_bar
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.s_rows
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.s_rows[k]
    }

    /// Frequency of mother-block singletons: ū − Σ u_l.
    pub fn mother_dust(&self) -> f64 {
        (self.u_bar - self.u.iter().sum::<f64>()).max(0.0)
    }

    /// Frequency of singleton inner blocks inside new outer block k.
    pub fn row_dust(&self, k: usize) -> f64 {
        (self.s_bar[k] - self.s_rows[k].iter().sum::<f64>()).max(0.0)
    }

    /// Frequency of fully isolated elements: 1 − ū − Σ s̄_k.
    pub fn isolated_mass(&self) -> f64 {
        (1.0 - self.u_bar - self.s_bar.iter().sum::<f64>()).max(0.0)
    }

    pub fn is_identity(&self) -> bool {
        approx(self.u_bar, 1.0)
            && self.u.len() == 1
            && approx(self.u[0], 1.0)
            && self.s_bar.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NuOutAtom {
    pub rate: f64,
    pub atom: MassPartition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NuInAtom {
    pub rate: f64,
    pub atom: BivariateMassPartition,
}

/// The full law of a simple nested fragmentation process: erosion
/// coefficients c_out, c_in1, c_in2 and finite-atom dislocation measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct FragmentationParams {
    pub c_out: f64,
    pub c_in1: f64,
    pub c_in2: f64,
    pub nu_out: Vec<NuOutAtom>,
    pub nu_in: Vec<NuInAtom>,
}

impl FragmentationParams {
    pub fn new(
        c_out: f64,
        c_in1: f64,
        c_in2: f64,
        nu_out: Vec<(f64, MassPartition)>,
        nu_in: Vec<(f64, BivariateMassPartition)>,
    ) -> Result<FragmentationParams> {
        for (name, c) in [("c_out", c_out), ("c_in1", c_in1), ("c_in2", c_in2)] {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::Negative(format!("{name} = {c}")));
            }
        }
        let mut out = Vec::with_capacity(nu_out.len());
        for (i, (rate, atom)) in nu_out.into_iter().enumerate() {
            if !rate.is_finite() || rate <= 0.0 {
                return Err(Error::BadParams(format!(
                    "nu_out atom {}: rate must be positive, got {rate}",
                    i + 1
                )));
            }
            if atom.is_identity() {
                return Err(Error::BadParams(format!(
                    "nu_out atom {}: s = (1) never fragments",
                    i + 1
                )));
            }
            out.push(NuOutAtom { rate, atom });
        }
        let mut inn = Vec::with_capacity(nu_in.len());
        for (i, (rate, atom)) in nu_in.into_iter().enumerate() {
            if !rate.is_finite() || rate <= 0.0 {
                return Err(Error::BadParams(format!(
                    "nu_in atom {}: rate must be positive, got {rate}",
                    i + 1
                )));
            }
            if atom.is_identity() {
                return Err(Error::BadParams(format!(
                    "nu_in atom {}: the element 1 never fragments",
                    i + 1
                )));
            }
            inn.push(NuInAtom { rate, atom });
        }
        Ok(FragmentationParams {
            c_out,
            c_in1,
            c_in2,
            nu_out: out,
            nu_in: inn,
        })
    }

    pub fn zero() -> FragmentationParams {
        FragmentationParams {
            c_out: 0.0,
            c_in1: 0.0,
            c_in2: 0.0,
            nu_out: Vec::new(),
            nu_in: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNuOut {
    rate: f64,
    #[serde(default)]
    s: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNuIn {
    rate: f64,
    #[serde(default)]
    u: Vec<f64>,
    #[serde(default)]
    u_bar: f64,
    #[serde(default)]
    s_bar: Vec<f64>,
    #[serde(default)]
    s_rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(default)]
    c_out: f64,
    #[serde(default)]
    c_in1: f64,
    #[serde(default)]
    c_in2: f64,
    #[serde(default)]
    nu_out: Vec<RawNuOut>,
    #[serde(default)]
    nu_in: Vec<RawNuIn>,
}

impl TryFrom<RawParams> for FragmentationParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<FragmentationParams> {
        let nu_out = raw
            .nu_out
            .into_iter()
            .map(|a| Ok((a.rate, validate_mass(&a.s)?)))
            .collect::<Result<Vec<_>>>()?;
        let nu_in = raw
            .nu_in
            .into_iter()
            .map(|a| {
                Ok((
                    a.rate,
                    canonicalize_bivariate(a.u, a.s_rows, a.u_bar, a.s_bar)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        FragmentationParams::new(raw.c_out, raw.c_in1, raw.c_in2, nu_out, nu_in)
    }
}

impl From<FragmentationParams> for RawParams {
    fn from(p: FragmentationParams) -> RawParams {
        RawParams {
            c_out: p.c_out,
            c_in1: p.c_in1,
            c_in2: p.c_in2,
            nu_out: p
                .nu_out
                .into_iter()
                .map(|a| RawNuOut {
                    rate: a.rate,
                    s: a.atom.s,
                })
                .collect(),
            nu_in: p
                .nu_in
                .into_iter()
                .map(|a| RawNuIn {
                    rate: a.rate,
                    u: a.atom.u,
                    u_bar: a.atom.u_bar,
                    s_bar: a.atom.s_bar,
                    s_rows: a.atom.s_rows,
                })
                .collect(),
        }
    }
}

/// The four binary measures as (rate, x) atom lists on [0,1].
#[derive(Clone, Debug, PartialEq, Default)]
pub struct BinaryMeasures {
    pub nu_bar_out: Vec<(f64, f64)>,
    pub nu_bar_in1: Vec<(f64, f64)>,
    pub nu_bar_in2: Vec<(f64, f64)>,
    pub nu_bar_in3: Vec<(f64, f64)>,
}

/// Project binary-branching parameters onto the four scalar measures.
///
/// Every ν_out atom must carry exactly two masses summing to 1; every ν_in
/// atom must match exactly one of the three binary shapes:
///   1. u = (u_1, 1−u_1), ū = 1         (inner split, both stay with mother)
///   2. ū = 0, s̄ = (1), row = (s, 1−s)  (block leaves, splitting in two)
///   3. u = (u_1), ū = u_1, s̄_1 = s_{1,1} = 1−u_1  (one piece stays, one goes)
pub fn binary_project(params: &FragmentationParams) -> Result<BinaryMeasures> {
    let mut m = BinaryMeasures::default();
    for (i, a) in params.nu_out.iter().enumerate() {
        let s = a.atom.parts();
        if s.len() == 2 && approx(s[0] + s[1], 1.0) {
            m.nu_bar_out.push((a.rate, s[0]));
            m.nu_bar_out.push((a.rate, s[1]));
        } else {
            return Err(Error::NotBinary(format!(
                "nu_out atom {}: need exactly two masses summing to 1",
                i + 1
            )));
        }
    }
    for (i, a) in params.nu_in.iter().enumerate() {
        let p = &a.atom;
        let su: f64 = p.u().iter().sum();
        if approx(p.u_bar(), 1.0) && p.s_bar().is_empty() && approx(su, 1.0) && p.u().len() == 2 {
            m.nu_bar_in1.push((a.rate, p.u()[0]));
            m.nu_bar_in1.push((a.rate, p.u()[1]));
            continue;
        }
        if approx(p.u_bar(), 0.0)
            && p.s_bar().len() == 1
            && approx(p.s_bar()[0], 1.0)
            && p.row(0).len() <= 2
            && approx(p.row(0).iter().sum::<f64>(), 1.0)
        {
            let s11 = p.row(0)[0];
            m.nu_bar_in2.push((a.rate, s11));
            m.nu_bar_in2.push((a.rate, 1.0 - s11));
            continue;
        }
        if p.u().len() == 1
            && approx(p.u_bar(), p.u()[0])
            && p.s_bar().len() == 1
            && approx(p.s_bar()[0], 1.0 - p.u()[0])
            && p.row(0).len() == 1
            && approx(p.row(0)[0], 1.0 - p.u()[0])
        {
            m.nu_bar_in3.push((a.rate, p.u()[0]));
            continue;
        }
        return Err(Error::NotBinary(format!(
            "nu_in atom {}: matches no binary shape",
            i + 1
        )));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_mass_examples() {
        let m = validate_mass(&[0.3, 0.5]).unwrap();
        assert_eq!(m.parts(), &[0.5, 0.3]);
        assert!((m.dust() - 0.2).abs() < 1e-12);

        let full = validate_mass(&[1.0]).unwrap();
        assert_eq!(full.parts(), &[1.0]);
        assert_eq!(full.dust(), 0.0);
        assert!(full.is_identity());

        assert_eq!(validate_mass(&[]).unwrap().dust(), 1.0);
        assert_eq!(
            validate_mass(&[0.5, 0.0, 0.3]).unwrap().parts(),
            &[0.5, 0.3]
        );
    }

    #[test]
    fn validate_mass_errors() {
        assert!(matches!(
            validate_mass(&[0.7, 0.7]),
            Err(Error::SumExceedsOne(_))
        ));
        assert!(matches!(validate_mass(&[-0.1]), Err(Error::Negative(_))));
        assert!(matches!(
            validate_mass(&[f64::NAN]),
            Err(Error::Negative(_))
        ));
    }

    #[test]
    fn bivariate_tie_break() {
        let b =
            canonicalize_bivariate(vec![], vec![vec![0.2, 0.1], vec![0.3]], 0.0, vec![0.3, 0.3])
                .unwrap();
        assert_eq!(b.s_bar(), &[0.3, 0.3]);
        assert_eq!(b.rows(), &[vec![0.3], vec![0.2, 0.1]]);
    }

    #[test]
    fn bivariate_identity_atom() {
        let one = canonicalize_bivariate(vec![1.0], vec![], 1.0, vec![]).unwrap();
        assert!(one.is_identity());
        assert_eq!(one, BivariateMassPartition::one());
        assert_eq!(one.mother_dust(), 0.0);
        assert_eq!(one.isolated_mass(), 0.0);
    }

    #[test]
    fn bivariate_errors() {
        assert!(matches!(
            canonicalize_bivariate(vec![0.6], vec![], 0.5, vec![]),
            Err(Error::RowSumExceedsBar(_))
        ));
        assert!(matches!(
            canonicalize_bivariate(vec![], vec![vec![0.4]], 0.0, vec![0.3]),
            Err(Error::RowSumExceedsBar(_))
        ));
        assert!(matches!(
            canonicalize_bivariate(vec![0.5], vec![], 0.6, vec![0.5]),
            Err(Error::TotalExceedsOne(_))
        ));
        assert!(matches!(
            canonicalize_bivariate(vec![-0.2], vec![], 0.5, vec![]),
            Err(Error::Negative(_))
        ));
    }

    #[test]
    fn bivariate_rows_sorted_and_zero_bars_dropped() {
        let b = canonicalize_bivariate(
            vec![0.1, 0.2],
            vec![vec![0.05, 0.2], vec![]],
            0.4,
            vec![0.3, 0.0],
        )
        .unwrap();
        assert_eq!(b.u(), &[0.2, 0.1]);
        assert_eq!(b.s_bar(), &[0.3]);
        assert_eq!(b.row(0), &[0.2, 0.05]);
        assert!((b.mother_dust() - 0.1).abs() < 1e-12);
        assert!((b.row_dust(0) - 0.05).abs() < 1e-12);
        assert!((b.isolated_mass() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn params_reject_identity_atoms() {
        let id = validate_mass(&[1.0]).unwrap();
        assert!(matches!(
            FragmentationParams::new(0.0, 0.0, 0.0, vec![(1.0, id)], vec![]),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            FragmentationParams::new(
                0.0,
                0.0,
                0.0,
                vec![],
                vec![(1.0, BivariateMassPartition::one())]
            ),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            FragmentationParams::new(-1.0, 0.0, 0.0, vec![], vec![]),
            Err(Error::Negative(_))
        ));
        let s = validate_mass(&[0.5, 0.5]).unwrap();
        assert!(matches!(
            FragmentationParams::new(0.0, 0.0, 0.0, vec![(0.0, s)], vec![]),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn params_json_schema_round_trip() {
        let text = r#"{"c_out":0.5,"c_in1":0.3,"c_in2":0.2,
            "nu_out":[{"rate":1.0,"s":[0.5,0.3]}],
            "nu_in":[{"rate":1.0,"u":[0.5],"u_bar":0.5,"s_bar":[0.5],"s_rows":[[0.5]]}]}"#;
        let p: FragmentationParams = serde_json::from_str(text).unwrap();
        assert_eq!(p.c_out, 0.5);
        assert_eq!(p.nu_out[0].atom.parts(), &[0.5, 0.3]);
        assert_eq!(p.nu_in[0].atom.u_bar(), 0.5);
        let back: FragmentationParams =
            serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn params_json_rejects_bad_input() {
        assert!(serde_json::from_str::<FragmentationParams>(r#"{"c_out":-1}"#).is_err());
        assert!(serde_json::from_str::<FragmentationParams>(
            r#"{"nu_out":[{"rate":1.0,"s":[0.7,0.7]}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<FragmentationParams>(r#"{"unknown_field":1}"#).is_err());
    }

    fn binary_fixture_like(nu_in_atom: (f64, BivariateMassPartition)) -> FragmentationParams {
        FragmentationParams::new(0.0, 0.0, 0.0, vec![], vec![nu_in_atom]).unwrap()
    }

    #[test]
    fn binary_project_nu_out() {
        let p = FragmentationParams::new(
            0.0,
            0.0,
            0.0,
            vec![(1.0, validate_mass(&[0.5, 0.5]).unwrap())],
            vec![],
        )
        .unwrap();
        let m = binary_project(&p).unwrap();
        assert_eq!(m.nu_bar_out, vec![(1.0, 0.5), (1.0, 0.5)]);

        let bad = FragmentationParams::new(
            0.0,
            0.0,
            0.0,
            vec![(1.0, validate_mass(&[0.5, 0.3]).unwrap())],
            vec![],
        )
        .unwrap();
        assert!(matches!(binary_project(&bad), Err(Error::NotBinary(_))));
    }

    #[test]
    fn binary_project_three_inner_shapes() {
        let shape1 = canonicalize_bivariate(vec![0.7, 0.3], vec![], 1.0, vec![]).unwrap();
        let m = binary_project(&binary_fixture_like((1.0, shape1))).unwrap();
        assert_eq!(m.nu_bar_in1, vec![(1.0, 0.7), (1.0, 0.3)]);
        assert!(m.nu_bar_in2.is_empty() && m.nu_bar_in3.is_empty());

        let shape2 = canonicalize_bivariate(vec![], vec![vec![0.6, 0.4]], 0.0, vec![1.0]).unwrap();
        let m = binary_project(&binary_fixture_like((1.0, shape2))).unwrap();
        assert_eq!(m.nu_bar_in2, vec![(1.0, 0.6), (1.0, 0.4)]);

        let shape3 = canonicalize_bivariate(vec![0.4], vec![vec![0.6]], 0.4, vec![0.6]).unwrap();
        let m = binary_project(&binary_fixture_like((1.0, shape3))).unwrap();
        assert_eq!(m.nu_bar_in3, vec![(1.0, 0.4)]);

        // u_1 < ū leaves mother dust: not one of the three binary shapes.
        let not_binary =
            canonicalize_bivariate(vec![0.3], vec![vec![0.5]], 0.5, vec![0.5]).unwrap();
        assert!(matches!(
            binary_project(&binary_fixture_like((1.0, not_binary))),
            Err(Error::NotBinary(_))
        ));
    }

    proptest! {
        #[test]
        fn validate_mass_sorts_and_accounts(raw in proptest::collection::vec(0.0f64..0.4, 0..5)) {
            if let Ok(m) = validate_mass(&raw) {
                for w in m.parts().windows(2) {
                    prop_assert!(w[0] >= w[1]);
                }
                let total: f64 = m.parts().iter().sum::<f64>() + m.dust();
                prop_assert!((total - 1.0).abs() < 1e-12 || m.parts().iter().sum::<f64>() > 1.0);
            }
        }

        #[test]
        fn canonicalize_bivariate_idempotent(
            u in proptest::collection::vec(0.0f64..0.3, 0..3),
            u_bar in 0.0f64..0.5,
            s_bar in proptest::collection::vec(0.0f64..0.2, 0..3),
            rows in proptest::collection::vec(proptest::collection::vec(0.0f64..0.1, 0..3), 0..3),
        ) {
            if let Ok(b) = canonicalize_bivariate(u, rows, u_bar, s_bar) {
                let again = canonicalize_bivariate(
                    b.u().to_vec(),
                    b.rows().to_vec(),
                    b.u_bar(),
                    b.s_bar().to_vec(),
                )
                .unwrap();
                prop_assert_eq!(again, b);
            }
        }
    }
}
