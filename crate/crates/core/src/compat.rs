//! Compatibility graph construction from secret-shared medical quotes.
//!
//! Each pair's hospital preprocesses its record into a flat integer vector
//! (see [`QuoteLayout`]) and secret-shares it. The peers then evaluate, for
//! every ordered pair `(i, j)`, whether the donor of `i` can give to the
//! patient of `j` and how much that transplant is worth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abb::{Session, Share, ShareMatrix};
use crate::gates::{bit_length, gt_batch, GateError};
use crate::oracle::PlainGraph;

/// Default length of the antigen and antibody vectors.
pub const DEFAULT_ANTIGENS: usize = 50;
/// Default number of regions.
pub const DEFAULT_REGIONS: usize = 8;
/// Default upper bound on an edge weight.
pub const DEFAULT_W_MAX: u64 = 1 << 20;
/// Largest age accepted in a quote.
pub const MAX_AGE: u64 = 127;

#[derive(Debug, Error)]
pub enum CompatError {
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("invalid quote: {0}")]
    InvalidQuote(String),
    #[error("policy weights can reach {max}, above the bound {w_max}")]
    WeightBound { max: u64, w_max: u64 },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("need at least {need} quotes, got {got}")]
    TooFewQuotes { need: usize, got: usize },
}

impl CompatError {
    pub fn is_disconnect(&self) -> bool {
        matches!(self, CompatError::Gate(g) if g.is_disconnect())
    }
}

pub type Result<T> = std::result::Result<T, CompatError>;

/// ABO blood group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BloodType {
    O,
    A,
    B,
    AB,
}

impl BloodType {
    pub const ALL: [BloodType; 4] = [BloodType::O, BloodType::A, BloodType::B, BloodType::AB];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Indicator in the order O, A, B, AB.
    pub fn one_hot(self) -> [u8; 4] {
        let mut v = [0; 4];
        v[self.index()] = 1;
        v
    }

    /// Donor groups a patient of this group can receive from.
    pub fn accepts(self) -> [u8; 4] {
        match self {
            BloodType::O => [1, 0, 0, 0],
            BloodType::A => [1, 1, 0, 0],
            BloodType::B => [1, 0, 1, 0],
            BloodType::AB => [1, 1, 1, 1],
        }
    }

    pub fn can_donate_to(self, patient: BloodType) -> bool {
        patient.accepts()[self.index()] == 1
    }

    /// Recovers the patient group from its acceptance vector.
    pub fn from_accepts(acc: [u8; 4]) -> Option<BloodType> {
        BloodType::ALL.into_iter().find(|b| b.accepts() == acc)
    }

    pub fn from_one_hot(v: [u8; 4]) -> Option<BloodType> {
        BloodType::ALL.into_iter().find(|b| b.one_hot() == v)
    }
}

/// Attributes used only by the prioritization policy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrioAttrs {
    pub patient_age: u8,
    pub pediatric: u8,
    pub prior_living_donor: u8,
    pub region: u16,
    pub donor_age: u8,
}

/// One patient-donor pair's private record, after client-side
/// preprocessing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputQuote {
    pub donor_blood: [u8; 4],
    pub patient_accepts: [u8; 4],
    pub donor_antigens: Vec<u8>,
    pub patient_antibodies: Vec<u8>,
    pub cpra: u8,
    pub prio_attrs: PrioAttrs,
}

impl InputQuote {
    pub fn new(
        donor: BloodType,
        patient: BloodType,
        donor_antigens: Vec<u8>,
        patient_antibodies: Vec<u8>,
        cpra: u8,
        prio_attrs: PrioAttrs,
    ) -> Self {
        InputQuote {
            donor_blood: donor.one_hot(),
            patient_accepts: patient.accepts(),
            donor_antigens,
            patient_antibodies,
            cpra,
            prio_attrs,
        }
    }

    pub fn donor_type(&self) -> Option<BloodType> {
        BloodType::from_one_hot(self.donor_blood)
    }

    pub fn patient_type(&self) -> Option<BloodType> {
        BloodType::from_accepts(self.patient_accepts)
    }

    pub fn check(&self, layout: &QuoteLayout) -> Result<()> {
        let bad = |m: String| Err(CompatError::InvalidQuote(m));
        if self.donor_type().is_none() {
            return bad(format!("donor blood {:?} is not one-hot", self.donor_blood));
        }
        if self.patient_type().is_none() {
            return bad(format!(
                "patient acceptance {:?} is not an ABO row",
                self.patient_accepts
            ));
        }
        for (name, v) in [
            ("donor antigens", &self.donor_antigens),
            ("patient antibodies", &self.patient_antibodies),
        ] {
            if v.len() != layout.antigens {
                return bad(format!("{name} has length {}, expected {}", v.len(), layout.antigens));
            }
            if v.iter().any(|&x| x > 1) {
                return bad(format!("{name} entries must be 0 or 1"));
            }
        }
        if self.cpra > 100 {
            return bad(format!("cpra {} above 100", self.cpra));
        }
        let a = &self.prio_attrs;
        if a.pediatric > 1 || a.prior_living_donor > 1 {
            return bad("flags must be 0 or 1".into());
        }
        if u64::from(a.patient_age) > MAX_AGE || u64::from(a.donor_age) > MAX_AGE {
            return bad(format!("ages must be at most {MAX_AGE}"));
        }
        if usize::from(a.region) >= layout.regions {
            return bad(format!("region {} outside 0..{}", a.region, layout.regions));
        }
        Ok(())
    }

    /// The flat vector that gets secret-shared; see [`QuoteLayout`].
    pub fn encode(&self, layout: &QuoteLayout) -> Result<Vec<u64>> {
        self.check(layout)?;
        let mut v = Vec::with_capacity(layout.len());
        v.extend(self.donor_blood.iter().map(|&x| u64::from(x)));
        v.extend(self.patient_accepts.iter().map(|&x| u64::from(x)));
        v.extend(self.donor_antigens.iter().map(|&x| u64::from(x)));
        v.extend(self.patient_antibodies.iter().map(|&x| u64::from(x)));
        let a = &self.prio_attrs;
        v.extend([
            u64::from(self.cpra),
            u64::from(a.patient_age),
            u64::from(a.pediatric),
            u64::from(a.prior_living_donor),
            u64::from(a.donor_age),
        ]);
        v.extend((0..layout.regions).map(|r| u64::from(r == usize::from(a.region))));
        Ok(v)
    }
}

/// Public shape of an encoded quote:
/// `[donor blood 4][patient accepts 4][antigens L][antibodies L]`
/// `[cpra][patient age][pediatric][prior donor][donor age][region one-hot R]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteLayout {
    pub antigens: usize,
    pub regions: usize,
}

impl Default for QuoteLayout {
    fn default() -> Self {
        QuoteLayout {
            antigens: DEFAULT_ANTIGENS,
            regions: DEFAULT_REGIONS,
        }
    }
}

impl QuoteLayout {
    pub fn len(&self) -> usize {
        8 + 2 * self.antigens + 5 + self.regions
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn scalar(&self, k: usize) -> usize {
        8 + 2 * self.antigens + k
    }
}

/// A secret-shared encoded quote.
#[derive(Debug, Clone)]
pub struct SharedQuote {
    layout: QuoteLayout,
    data: Vec<Share>,
}

impl SharedQuote {
    pub fn new(layout: QuoteLayout, data: Vec<Share>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(CompatError::InvalidQuote(format!(
                "shared quote has {} entries, layout needs {}",
                data.len(),
                layout.len()
            )));
        }
        Ok(SharedQuote { layout, data })
    }

    pub fn layout(&self) -> QuoteLayout {
        self.layout
    }

    pub fn as_slice(&self) -> &[Share] {
        &self.data
    }

    pub fn donor_blood(&self) -> &[Share] {
        &self.data[0..4]
    }

    pub fn patient_accepts(&self) -> &[Share] {
        &self.data[4..8]
    }

    pub fn donor_antigens(&self) -> &[Share] {
        &self.data[8..8 + self.layout.antigens]
    }

    pub fn patient_antibodies(&self) -> &[Share] {
        let l = self.layout.antigens;
        &self.data[8 + l..8 + 2 * l]
    }

    pub fn cpra(&self) -> Share {
        self.data[self.layout.scalar(0)]
    }

    pub fn patient_age(&self) -> Share {
        self.data[self.layout.scalar(1)]
    }

    pub fn pediatric(&self) -> Share {
        self.data[self.layout.scalar(2)]
    }

    pub fn prior_living_donor(&self) -> Share {
        self.data[self.layout.scalar(3)]
    }

    pub fn donor_age(&self) -> Share {
        self.data[self.layout.scalar(4)]
    }

    pub fn region(&self) -> &[Share] {
        &self.data[self.layout.scalar(5)..]
    }

    /// Patient group one-hot, a linear function of the acceptance vector:
    /// `AB = acc3`, `A = acc1 - acc3`, `B = acc2 - acc3`,
    /// `O = 1 - acc1 - acc2 + acc3`.
    pub fn patient_blood(&self, s: &Session) -> [Share; 4] {
        let acc = self.patient_accepts();
        [
            s.public(1) - acc[1] - acc[2] + acc[3],
            acc[1] - acc[3],
            acc[2] - acc[3],
            acc[3],
        ]
    }
}

/// Public coefficients of the weighted prioritization sum. Every criterion
/// is a 0/1 indicator for the transplant from donor `i` to patient `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtendedPolicy {
    pub constant: u64,
    /// Both pairs registered in the same region.
    pub region_match: u64,
    /// Patient `j` is a child.
    pub pediatric: u64,
    /// Patient `j` donated a kidney before.
    pub prior_living_donor: u64,
    /// `|donor age i - patient age j| <= age_gap_years`.
    pub age_gap: u64,
    pub age_gap_years: u64,
    /// Donor `i` and patient `j` have the same ABO group.
    pub blood_identical: u64,
    /// Patient `j` has `cpra >= sensitized_cpra`.
    pub highly_sensitized: u64,
    pub sensitized_cpra: u64,
}

impl Default for ExtendedPolicy {
    fn default() -> Self {
        ExtendedPolicy::zero()
    }
}

impl ExtendedPolicy {
    /// Policy with zero coefficients and the usual thresholds (10 years,
    /// cpra 80).
    pub fn zero() -> Self {
        ExtendedPolicy {
            constant: 0,
            region_match: 0,
            pediatric: 0,
            prior_living_donor: 0,
            age_gap: 0,
            age_gap_years: 10,
            blood_identical: 0,
            highly_sensitized: 0,
            sensitized_cpra: 80,
        }
    }

    pub fn max_weight(&self) -> u64 {
        self.constant
            + self.region_match
            + self.pediatric
            + self.prior_living_donor
            + self.age_gap
            + self.blood_identical
            + self.highly_sensitized
    }
}

/// How edge weights are derived from a pair of quotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrioPolicy {
    /// Every compatible transplant weighs the same; maximizes the count.
    Constant { weight: u64 },
    Extended(ExtendedPolicy),
}

impl Default for PrioPolicy {
    fn default() -> Self {
        PrioPolicy::Constant { weight: 1 }
    }
}

impl PrioPolicy {
    pub fn max_weight(&self) -> u64 {
        match self {
            PrioPolicy::Constant { weight } => *weight,
            PrioPolicy::Extended(e) => e.max_weight(),
        }
    }

    pub fn check(&self, w_max: u64) -> Result<()> {
        let max = self.max_weight();
        if max > w_max {
            return Err(CompatError::WeightBound { max, w_max });
        }
        if let PrioPolicy::Extended(e) = self {
            if e.age_gap_years > MAX_AGE {
                return Err(CompatError::InvalidPolicy(format!(
                    "age gap threshold {} above {MAX_AGE}",
                    e.age_gap_years
                )));
            }
            if e.sensitized_cpra > 101 {
                return Err(CompatError::InvalidPolicy(format!(
                    "cpra threshold {} above 101",
                    e.sensitized_cpra
                )));
            }
        }
        Ok(())
    }

    /// Plaintext weight of the transplant from donor `i` to patient `j`.
    pub fn plain_weight(&self, qi: &InputQuote, qj: &InputQuote) -> u64 {
        match self {
            PrioPolicy::Constant { weight } => *weight,
            PrioPolicy::Extended(e) => {
                let (ai, aj) = (&qi.prio_attrs, &qj.prio_attrs);
                let gap = u64::from(ai.donor_age).abs_diff(u64::from(aj.patient_age));
                let same_blood = qi.donor_type().is_some() && qi.donor_type() == qj.patient_type();
                e.constant
                    + e.region_match * u64::from(ai.region == aj.region)
                    + e.pediatric * u64::from(aj.pediatric)
                    + e.prior_living_donor * u64::from(aj.prior_living_donor)
                    + e.age_gap * u64::from(gap <= e.age_gap_years)
                    + e.blood_identical * u64::from(same_blood)
                    + e.highly_sensitized * u64::from(u64::from(qj.cpra) >= e.sensitized_cpra)
            }
        }
    }
}

/// Plaintext rule: ABO compatible and no antigen of donor `i` is targeted
/// by an antibody of patient `j`.
pub fn plain_compatible(qi: &InputQuote, qj: &InputQuote) -> bool {
    let blood: u32 = qi
        .donor_blood
        .iter()
        .zip(&qj.patient_accepts)
        .map(|(&a, &b)| u32::from(a) * u32::from(b))
        .sum();
    let hits: u32 = qi
        .donor_antigens
        .iter()
        .zip(&qj.patient_antibodies)
        .map(|(&a, &b)| u32::from(a) * u32::from(b))
        .sum();
    blood == 1 && hits == 0
}

/// Plaintext compatibility graph.
pub fn plain_graph(quotes: &[InputQuote], policy: &PrioPolicy) -> PlainGraph {
    let n = quotes.len();
    let mut g = PlainGraph::empty(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && plain_compatible(&quotes[i], &quotes[j]) {
                g.set_edge(i, j, policy.plain_weight(&quotes[i], &quotes[j]));
            }
        }
    }
    g
}

/// Secret adjacency and weight matrices.
#[derive(Debug, Clone)]
pub struct CompatGraph {
    pub m: ShareMatrix,
    pub w: ShareMatrix,
}

impl CompatGraph {
    pub fn n(&self) -> usize {
        self.m.rows()
    }
}

/// Secret-shares the quotes of one dealer peer. The dealer passes
/// `Some(quotes)`; every peer passes the public count.
pub fn share_quotes(
    s: &mut Session,
    dealer: crate::transport::PeerId,
    quotes: Option<&[InputQuote]>,
    count: usize,
    layout: QuoteLayout,
) -> std::result::Result<Vec<SharedQuote>, crate::Error> {
    let flat = match quotes {
        Some(qs) if s.me() == dealer => {
            let mut v = Vec::with_capacity(count * layout.len());
            for q in qs {
                v.extend(q.encode(&layout)?);
            }
            Some(v)
        }
        _ => None,
    };
    let shares = s.input(dealer, flat.as_deref(), count * layout.len())?;
    Ok(shares
        .chunks_exact(layout.len())
        .map(|c| SharedQuote::new(layout, c.to_vec()))
        .collect::<Result<_>>()?)
}

/// Comparison width used by graph construction.
fn compare_bits(layout: &QuoteLayout, policy: &PrioPolicy) -> u32 {
    let hla = bit_length(layout.antigens).max(1);
    match policy {
        PrioPolicy::Constant { .. } => hla,
        // Ages plus a threshold, and cpra, stay below 2^8.
        PrioPolicy::Extended(_) => hla.max(8),
    }
}

/// Builds `M` and `W` for all ordered pairs at once.
///
/// Rounds: one for all dot products, one comparison batch, one
/// multiplication. The transcript depends only on `N`, the layout and the
/// policy kind.
pub fn build_graph(
    s: &mut Session,
    quotes: &[SharedQuote],
    policy: &PrioPolicy,
    w_max: u64,
) -> Result<CompatGraph> {
    let n = quotes.len();
    if n < 2 {
        return Err(CompatError::TooFewQuotes { need: 2, got: n });
    }
    policy.check(w_max)?;
    let layout = quotes[0].layout();
    if quotes.iter().any(|q| q.layout() != layout) {
        return Err(CompatError::InvalidQuote("quotes use different layouts".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let ext = match policy {
        PrioPolicy::Extended(e) => Some(*e),
        PrioPolicy::Constant { .. } => None,
    };

    // Dot products: blood, antigen hits, and under the extended policy
    // region match and identical blood group.
    let patient_blood: Vec<[Share; 4]> = quotes.iter().map(|q| q.patient_blood(s)).collect();
    let mut dots: Vec<(&[Share], &[Share])> = Vec::new();
    for &(i, j) in &pairs {
        dots.push((quotes[i].donor_blood(), quotes[j].patient_accepts()));
        dots.push((quotes[i].donor_antigens(), quotes[j].patient_antibodies()));
        if ext.is_some() {
            dots.push((quotes[i].region(), quotes[j].region()));
            dots.push((quotes[i].donor_blood(), &patient_blood[j]));
        }
    }
    let per = if ext.is_some() { 4 } else { 2 };
    let dv = s.dot_batch(&dots).map_err(GateError::from)?;

    // Comparisons: any antigen hit; under the extended policy both age
    // bounds per pair and the sensitization band per patient.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in 0..pairs.len() {
        xs.push(dv[per * p + 1]);
        ys.push(Share::ZERO);
    }
    if let Some(e) = ext {
        for &(i, j) in &pairs {
            let (da, pa) = (quotes[i].donor_age(), quotes[j].patient_age());
            xs.push(da);
            ys.push(s.add_public(pa, e.age_gap_years));
            xs.push(pa);
            ys.push(s.add_public(da, e.age_gap_years));
        }
        for q in quotes {
            xs.push(s.add_public(q.cpra(), 1));
            ys.push(s.public(e.sensitized_cpra));
        }
    }
    let cmp = gt_batch(s, &xs, &ys, compare_bits(&layout, policy))?;

    let mut mx = Vec::new();
    let mut my = Vec::new();
    let np = pairs.len();
    let me = s.me();
    for p in 0..np {
        mx.push(dv[per * p]);
        my.push(cmp[p].not(me));
    }
    if ext.is_some() {
        for p in 0..np {
            mx.push(cmp[np + 2 * p].not(me));
            my.push(cmp[np + 2 * p + 1].not(me));
        }
    }
    let prod = s.mul_batch(&mx, &my).map_err(GateError::from)?;

    let mut m = ShareMatrix::zeros(n, n);
    let mut w = ShareMatrix::zeros(n, n);
    for (p, &(i, j)) in pairs.iter().enumerate() {
        m.set(i, j, prod[p]);
        let weight = match (policy, ext) {
            (PrioPolicy::Constant { weight }, _) => s.public(*weight),
            (_, Some(e)) => {
                let hs = cmp[3 * np + j];
                let qj = &quotes[j];
                s.public(e.constant)
                    + dv[per * p + 2] * e.region_match
                    + qj.pediatric() * e.pediatric
                    + qj.prior_living_donor() * e.prior_living_donor
                    + prod[np + p] * e.age_gap
                    + dv[per * p + 3] * e.blood_identical
                    + hs * e.highly_sensitized
            }
            _ => unreachable!(),
        };
        w.set(i, j, weight);
    }
    Ok(CompatGraph { m, w })
}

/// Compatibility bit for one ordered pair.
pub fn comp_check(s: &mut Session, qi: &SharedQuote, qj: &SharedQuote) -> Result<Share> {
    let g = build_graph(s, &[qi.clone(), qj.clone()], &PrioPolicy::default(), 1)?;
    Ok(g.m.get(0, 1))
}

/// Priority weight for one ordered pair under `policy`.
pub fn prio(
    s: &mut Session,
    qi: &SharedQuote,
    qj: &SharedQuote,
    policy: &PrioPolicy,
) -> Result<Share> {
    let g = build_graph(s, &[qi.clone(), qj.clone()], policy, policy.max_weight())?;
    Ok(g.w.get(0, 1))
}

#[cfg(test)]
mod tests {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::abb::{run_local, Ring, SeedSource};
    use crate::transport::PeerId;

    fn small_layout() -> QuoteLayout {
        QuoteLayout {
            antigens: 3,
            regions: 4,
        }
    }

    fn quote(d: BloodType, p: BloodType, ag: Vec<u8>, ab: Vec<u8>) -> InputQuote {
        InputQuote::new(d, p, ag, ab, 0, PrioAttrs::default())
    }

    fn random_quote(rng: &mut StdRng, layout: &QuoteLayout) -> InputQuote {
        let l = layout.antigens;
        InputQuote::new(
            BloodType::ALL[rng.random_range(0..4)],
            BloodType::ALL[rng.random_range(0..4)],
            (0..l).map(|_| rng.random_bool(0.15) as u8).collect(),
            (0..l).map(|_| rng.random_bool(0.1) as u8).collect(),
            rng.random_range(0..=100),
            PrioAttrs {
                patient_age: rng.random_range(0..=80),
                pediatric: rng.random_bool(0.2) as u8,
                prior_living_donor: rng.random_bool(0.1) as u8,
                region: rng.random_range(0..layout.regions as u16),
                donor_age: rng.random_range(18..=75),
            },
        )
    }

    /// Runs secure construction and opens both matrices.
    fn secure(quotes: &[InputQuote], layout: QuoteLayout, policy: PrioPolicy) -> PlainGraph {
        let p0 = PeerId::new(0).unwrap();
        let n = quotes.len();
        let out = run_local(Ring::default(), SeedSource::Fixed(n as u64), |s| {
            let me = s.me();
            let shared = share_quotes(s, p0, (me == p0).then_some(quotes), n, layout)?;
            let g = build_graph(s, &shared, &policy, DEFAULT_W_MAX)?;
            let m = s.open_batch(g.m.as_slice())?;
            let w = s.open_batch(g.w.as_slice())?;
            Ok((m, w))
        })
        .unwrap();
        let (m, w) = &out[0];
        assert!(m.iter().all(|&x| x <= 1));
        let adj: Vec<bool> = m.iter().map(|&x| x == 1).collect();
        let masked: Vec<u64> = w.iter().zip(m).map(|(&w, &m)| if m == 1 { w } else { 0 }).collect();
        PlainGraph::from_matrices(n, adj, masked)
    }

    #[test]
    fn abo_table() {
        use BloodType::*;
        assert!(O.can_donate_to(AB) && O.can_donate_to(O));
        assert!(!A.can_donate_to(B) && !AB.can_donate_to(A));
        assert!(AB.can_donate_to(AB));
        for b in BloodType::ALL {
            assert_eq!(BloodType::from_accepts(b.accepts()), Some(b));
        }
    }

    #[test]
    fn plaintext_examples() {
        use BloodType::*;
        let universal = quote(O, O, vec![0, 0, 0], vec![0, 0, 0]);
        let any = quote(AB, AB, vec![0, 0, 0], vec![0, 0, 0]);
        assert!(plain_compatible(&universal, &any));
        let donor = quote(O, O, vec![1, 0, 1], vec![0, 0, 0]);
        let patient = quote(O, AB, vec![0, 0, 0], vec![0, 0, 1]);
        assert!(!plain_compatible(&donor, &patient));
    }

    #[test]
    fn encode_rejects_bad_quotes() {
        let l = small_layout();
        let mut q = quote(BloodType::A, BloodType::B, vec![0, 1, 0], vec![0, 0, 0]);
        assert_eq!(q.encode(&l).unwrap().len(), l.len());
        q.donor_blood = [1, 1, 0, 0];
        assert!(q.encode(&l).is_err());
        let q = quote(BloodType::A, BloodType::B, vec![0, 2, 0], vec![0, 0, 0]);
        assert!(q.encode(&l).is_err());
        let q = quote(BloodType::A, BloodType::B, vec![0, 0], vec![0, 0, 0]);
        assert!(q.encode(&l).is_err());
    }

    #[test]
    fn mutual_pair_gives_swap_matrix() {
        let q = vec![
            quote(BloodType::O, BloodType::A, vec![0, 0, 0], vec![0, 0, 0]),
            quote(BloodType::A, BloodType::O, vec![0, 0, 0], vec![0, 0, 0]),
        ];
        let g = secure(&q, small_layout(), PrioPolicy::default());
        assert_eq!(g.adjacency(), &[false, true, true, false]);
        assert_eq!(g.weights(), &[0, 1, 1, 0]);
    }

    #[test]
    fn fully_sensitized_patients_have_no_edges() {
        let q: Vec<InputQuote> = (0..4)
            .map(|i| quote(BloodType::O, BloodType::AB, vec![(i % 2) as u8, 1, 0], vec![1, 1, 1]))
            .collect();
        let g = secure(&q, small_layout(), PrioPolicy::default());
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn exhaustive_blood_and_small_antigen_space() {
        // Every blood pairing with every 2-bit antigen/antibody pattern.
        let layout = QuoteLayout {
            antigens: 2,
            regions: 1,
        };
        let mut quotes = Vec::new();
        for d in BloodType::ALL {
            for p in BloodType::ALL {
                for pat in 0..4u8 {
                    quotes.push(quote(d, p, vec![pat & 1, pat >> 1], vec![pat >> 1, pat & 1]));
                }
            }
        }
        let g = secure(&quotes, layout, PrioPolicy::default());
        assert_eq!(g, plain_graph(&quotes, &PrioPolicy::default()));
    }

    #[test]
    fn extended_region_and_pediatric() {
        let policy = PrioPolicy::Extended(ExtendedPolicy {
            region_match: 3,
            pediatric: 2,
            ..ExtendedPolicy::zero()
        });
        let attrs = |ped| PrioAttrs {
            patient_age: 10,
            pediatric: ped,
            prior_living_donor: 0,
            region: 2,
            donor_age: 50,
        };
        let q = vec![
            InputQuote::new(BloodType::O, BloodType::O, vec![0; 3], vec![0; 3], 0, attrs(1)),
            InputQuote::new(BloodType::O, BloodType::O, vec![0; 3], vec![0; 3], 0, attrs(1)),
        ];
        assert_eq!(policy.plain_weight(&q[0], &q[1]), 5);
        let g = secure(&q, small_layout(), policy);
        assert_eq!(g.weight(0, 1), 5);
        let zero = PrioPolicy::Extended(ExtendedPolicy::zero());
        assert_eq!(secure(&q, small_layout(), zero).weight(0, 1), 0);
    }

    #[test]
    fn random_instances_match_plaintext() {
        let mut rng = StdRng::seed_from_u64(8);
        let layout = QuoteLayout {
            antigens: 12,
            regions: 3,
        };
        let ext = PrioPolicy::Extended(ExtendedPolicy {
            constant: 1,
            region_match: 3,
            pediatric: 5,
            prior_living_donor: 7,
            age_gap: 11,
            age_gap_years: 15,
            blood_identical: 13,
            highly_sensitized: 17,
            sensitized_cpra: 80,
        });
        for trial in 0..4 {
            let quotes: Vec<InputQuote> = (0..8).map(|_| random_quote(&mut rng, &layout)).collect();
            let policy = if trial % 2 == 0 { PrioPolicy::default() } else { ext };
            assert_eq!(secure(&quotes, layout, policy), plain_graph(&quotes, &policy));
        }
    }

    #[test]
    fn weight_bound_is_enforced() {
        let p = PrioPolicy::Constant { weight: 10 };
        assert!(matches!(p.check(5), Err(CompatError::WeightBound { .. })));
        assert!(p.check(10).is_ok());
    }

    #[test]
    fn transcript_depends_only_on_sizes() {
        let mut rng = StdRng::seed_from_u64(9);
        let layout = small_layout();
        let p0 = PeerId::new(0).unwrap();
        let mut summaries = Vec::new();
        for _ in 0..2 {
            let quotes: Vec<InputQuote> = (0..5).map(|_| random_quote(&mut rng, &layout)).collect();
            let out = run_local(Ring::default(), SeedSource::Entropy, |s| {
                let me = s.me();
                let shared = share_quotes(s, p0, (me == p0).then_some(&quotes[..]), 5, layout)?;
                build_graph(s, &shared, &PrioPolicy::Extended(ExtendedPolicy::zero()), 10)?;
                Ok(s.transcript().summary())
            })
            .unwrap();
            summaries.push(out);
        }
        assert_eq!(summaries[0], summaries[1]);
    }
}
