//! Error rate, reality shift rate, and maximal reality shift rate over
//! recorded protocol outcomes, with per-domain / per-group-size / per-task
//! breakdowns and JSON, CSV, and markdown report rendering.
//!
//! All arithmetic is exact (integer numerator over integer denominator);
//! floating point appears only when a value is rendered.

use std::collections::{BTreeMap, BTreeSet};

use serde::ser::SerializeStruct;
use serde::Serialize;
use thiserror::Error;

use crate::protocols::{Protocol, ProtocolOutcome};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("outcome set for protocol {0} is empty")]
    EmptySet(Protocol),
    #[error("no baseline-correct questions available for {context}")]
    EmptyBaselineCorrect { context: String },
    #[error("expected a baseline (B) outcome set, got {0}")]
    NotBaseline(Protocol),
    #[error("expected an outcome set for protocol {expected}, got {got}")]
    ProtocolMismatch { expected: Protocol, got: Protocol },
    #[error("duplicate outcome for question {id} under protocol {protocol}")]
    DuplicateOutcome { protocol: Protocol, id: String },
}

/// An exact fraction in [0, 1]. Comparison and equality are by cross
/// multiplication, so 1/2 == 2/4.
#[derive(Debug, Clone, Copy)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    /// Panics if `den` is zero or the fraction exceeds 1; the metric
    /// formulas guarantee both by construction.
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "ratio denominator must be positive");
        assert!(num <= den, "metric ratios stay within [0, 1]");
        Ratio { num, den }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Fixed four-decimal rendering, e.g. "0.3000".
    pub fn render(self) -> String {
        format!("{:.4}", self.value())
    }

    /// Percentage with two decimals, e.g. "30.00".
    pub fn render_percent(self) -> String {
        format!("{:.2}", self.num as f64 * 100.0 / self.den as f64)
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.num as u128 * other.den as u128 == other.num as u128 * self.den as u128
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Ratio", 3)?;
        s.serialize_field("numerator", &self.num)?;
        s.serialize_field("denominator", &self.den)?;
        s.serialize_field("value", &((self.value() * 10_000.0).round() / 10_000.0))?;
        s.end()
    }
}

/// All outcomes recorded for one protocol, keyed by question id.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeSet {
    pub protocol: Protocol,
    pub outcomes: BTreeMap<String, ProtocolOutcome>,
}

impl OutcomeSet {
    pub fn new(protocol: Protocol) -> Self {
        OutcomeSet { protocol, outcomes: BTreeMap::new() }
    }

    /// Rejects a second outcome for a question already in the set.
    pub fn insert(&mut self, outcome: ProtocolOutcome) -> Result<(), MetricsError> {
        if outcome.protocol != self.protocol {
            return Err(MetricsError::ProtocolMismatch {
                expected: self.protocol,
                got: outcome.protocol,
            });
        }
        let id = outcome.question_id.clone();
        if self.outcomes.contains_key(&id) {
            return Err(MetricsError::DuplicateOutcome { protocol: self.protocol, id });
        }
        self.outcomes.insert(id, outcome);
        Ok(())
    }

    pub fn from_outcomes<I>(protocol: Protocol, outcomes: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = ProtocolOutcome>,
    {
        let mut set = OutcomeSet::new(protocol);
        for outcome in outcomes {
            set.insert(outcome)?;
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Question ids answered correctly. A parse failure can never be
    /// correct, so unparseable baselines drop out of this set on their own.
    pub fn correct_ids(&self) -> BTreeSet<&str> {
        self.outcomes
            .values()
            .filter(|o| o.correct)
            .map(|o| o.question_id.as_str())
            .collect()
    }

    /// Question ids answered incorrectly, parse failures included.
    pub fn wrong_ids(&self) -> BTreeSet<&str> {
        self.outcomes
            .values()
            .filter(|o| !o.correct)
            .map(|o| o.question_id.as_str())
            .collect()
    }
}

/// Err^P: wrongly answered questions over all questions asked.
pub fn error_rate(set: &OutcomeSet) -> Result<Ratio, MetricsError> {
    if set.is_empty() {
        return Err(MetricsError::EmptySet(set.protocol));
    }
    let wrong = set.outcomes.values().filter(|o| !o.correct).count() as u64;
    Ok(Ratio::new(wrong, set.len() as u64))
}

fn require_baseline(set: &OutcomeSet) -> Result<(), MetricsError> {
    if set.protocol != Protocol::B {
        return Err(MetricsError::NotBaseline(set.protocol));
    }
    Ok(())
}

/// σ^P: the fraction of baseline-correct questions answered wrongly under
/// the influenced protocol. Questions absent from the influenced set are
/// excluded from both sides of the fraction and logged.
pub fn reality_shift(baseline: &OutcomeSet, influenced: &OutcomeSet) -> Result<Ratio, MetricsError> {
    require_baseline(baseline)?;
    let baseline_correct = baseline.correct_ids();
    let mut den = 0u64;
    let mut num = 0u64;
    let mut missing = 0usize;
    for id in &baseline_correct {
        match influenced.outcomes.get(*id) {
            Some(outcome) => {
                den += 1;
                if !outcome.correct {
                    num += 1;
                }
            }
            None => missing += 1,
        }
    }
    if missing > 0 {
        log::warn!(
            "reality shift for {}: {missing} baseline-correct question(s) missing from the influenced set, excluded",
            influenced.protocol
        );
    }
    if den == 0 {
        return Err(MetricsError::EmptyBaselineCorrect {
            context: format!("sigma^{}", influenced.protocol),
        });
    }
    Ok(Ratio::new(num, den))
}

/// σ_max: the fraction of baseline-correct questions answered wrongly under
/// at least one of the four misleading protocols. A baseline-correct
/// question must appear in at least one of the four sets to count toward
/// the denominator; absent-everywhere questions are excluded and logged.
pub fn max_reality_shift(
    baseline: &OutcomeSet,
    gs: &OutcomeSet,
    gl: &OutcomeSet,
    rs: &OutcomeSet,
    rl: &OutcomeSet,
) -> Result<Ratio, MetricsError> {
    require_baseline(baseline)?;
    let influenced = [gs, gl, rs, rl];
    for (set, expected) in influenced.iter().zip(Protocol::INFLUENCE) {
        if set.protocol != expected {
            return Err(MetricsError::ProtocolMismatch { expected, got: set.protocol });
        }
    }
    let mut den = 0u64;
    let mut num = 0u64;
    let mut missing = 0usize;
    for id in baseline.correct_ids() {
        let mut covered = false;
        let mut shifted = false;
        for set in influenced {
            if let Some(outcome) = set.outcomes.get(id) {
                covered = true;
                if !outcome.correct {
                    shifted = true;
                }
            }
        }
        if covered {
            den += 1;
            if shifted {
                num += 1;
            }
        } else {
            missing += 1;
        }
    }
    if missing > 0 {
        log::warn!(
            "maximal reality shift: {missing} baseline-correct question(s) missing from every misleading set, excluded"
        );
    }
    if den == 0 {
        return Err(MetricsError::EmptyBaselineCorrect { context: "sigma_max".to_string() });
    }
    Ok(Ratio::new(num, den))
}

/// Metrics for one protocol within one group of questions.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolMetrics {
    pub err: Ratio,
    /// Absent for the baseline itself and whenever the shift denominator
    /// is empty (reported as a warning).
    pub sigma: Option<Ratio>,
    pub total: u64,
    pub wrong: u64,
}

/// Full metric block for one group of questions (the whole run, or one
/// breakdown bucket).
#[derive(Debug, Clone, Serialize)]
pub struct GroupReport {
    pub per_protocol: BTreeMap<Protocol, ProtocolMetrics>,
    /// Present only when all four misleading protocols are in the group and
    /// the shift denominator is non-empty.
    pub sigma_max: Option<Ratio>,
    /// |Q_correct^B| for this group, before coverage intersection.
    pub baseline_correct: u64,
}

/// Computes every defined metric for one group of outcome sets. Degraded
/// inputs (no baseline, empty shift denominators, duplicate protocols)
/// produce warnings rather than errors so partial runs still report.
pub fn build_group_report(sets: &[&OutcomeSet]) -> (GroupReport, Vec<String>) {
    let mut warnings = Vec::new();
    let mut by_protocol: BTreeMap<Protocol, &OutcomeSet> = BTreeMap::new();
    for set in sets {
        if set.is_empty() {
            continue;
        }
        if by_protocol.insert(set.protocol, set).is_some() {
            warnings.push(format!(
                "multiple outcome sets for protocol {}; keeping the last",
                set.protocol
            ));
        }
    }
    let baseline = by_protocol.get(&Protocol::B).copied();
    if baseline.is_none() && by_protocol.keys().any(|p| *p != Protocol::B) {
        warnings.push("no baseline outcomes; shift metrics unavailable".to_string());
    }
    let mut per_protocol = BTreeMap::new();
    for (&protocol, set) in &by_protocol {
        let err = error_rate(set).expect("empty sets were filtered out");
        let sigma = match (protocol, baseline) {
            (Protocol::B, _) | (_, None) => None,
            (_, Some(base)) => match reality_shift(base, set) {
                Ok(sigma) => Some(sigma),
                Err(e) => {
                    warnings.push(format!("sigma^{protocol} unavailable: {e}"));
                    None
                }
            },
        };
        let total = set.len() as u64;
        let wrong = err.num;
        per_protocol.insert(protocol, ProtocolMetrics { err, sigma, total, wrong });
    }
    let sigma_max = match baseline {
        Some(base) => {
            let influence: Vec<&OutcomeSet> = Protocol::INFLUENCE
                .iter()
                .filter_map(|p| by_protocol.get(p).copied())
                .collect();
            if influence.len() == Protocol::INFLUENCE.len() {
                match max_reality_shift(base, influence[0], influence[1], influence[2], influence[3])
                {
                    Ok(r) => Some(r),
                    Err(e) => {
                        warnings.push(format!("sigma_max unavailable: {e}"));
                        None
                    }
                }
            } else {
                None
            }
        }
        None => None,
    };
    let baseline_correct = baseline.map(|b| b.correct_ids().len() as u64).unwrap_or(0);
    (GroupReport { per_protocol, sigma_max, baseline_correct }, warnings)
}

/// One ledger row paired with the grouping attributes the outcome itself
/// does not carry.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeRecord {
    pub outcome: ProtocolOutcome,
    pub task: String,
    pub domain: String,
    /// Number of misleading peers; 0 for baseline outcomes.
    pub group_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Domain,
    GroupSize,
    Task,
}

impl GroupKey {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::Domain => "domain",
            GroupKey::GroupSize => "group_size",
            GroupKey::Task => "task",
        }
    }
}

impl std::fmt::Display for GroupKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn insert_record(
    sets: &mut BTreeMap<Protocol, OutcomeSet>,
    record: &OutcomeRecord,
    bucket: &str,
    warnings: &mut Vec<String>,
) {
    let set = sets
        .entry(record.outcome.protocol)
        .or_insert_with(|| OutcomeSet::new(record.outcome.protocol));
    if let Err(e) = set.insert(record.outcome.clone()) {
        warnings.push(format!("bucket {bucket}: {e}; keeping the first outcome"));
    }
}

/// Recomputes the full metric block per bucket of the grouping key.
/// Baseline outcomes join every group-size bucket (they have no group size
/// of their own) and split normally for domain and task.
pub fn breakdown(
    records: &[OutcomeRecord],
    key: GroupKey,
) -> (BTreeMap<String, GroupReport>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut buckets: BTreeMap<String, BTreeMap<Protocol, OutcomeSet>> = BTreeMap::new();
    if key == GroupKey::GroupSize {
        // Seed buckets from non-baseline rows so baseline replication below
        // has somewhere to land.
        for record in records {
            if record.outcome.protocol != Protocol::B {
                buckets.entry(record.group_size.to_string()).or_default();
            }
        }
    }
    for record in records {
        match key {
            GroupKey::Domain => {
                let bucket = record.domain.clone();
                insert_record(buckets.entry(bucket.clone()).or_default(), record, &bucket, &mut warnings);
            }
            GroupKey::Task => {
                let bucket = record.task.clone();
                insert_record(buckets.entry(bucket.clone()).or_default(), record, &bucket, &mut warnings);
            }
            GroupKey::GroupSize => {
                if record.outcome.protocol == Protocol::B {
                    for (bucket, sets) in buckets.iter_mut() {
                        let name = bucket.clone();
                        insert_record(sets, record, &name, &mut warnings);
                    }
                } else {
                    let bucket = record.group_size.to_string();
                    insert_record(
                        buckets.entry(bucket.clone()).or_default(),
                        record,
                        &bucket,
                        &mut warnings,
                    );
                }
            }
        }
    }
    let mut reports = BTreeMap::new();
    for (bucket, sets) in buckets {
        let refs: Vec<&OutcomeSet> = sets.values().collect();
        let (report, bucket_warnings) = build_group_report(&refs);
        for w in bucket_warnings {
            warnings.push(format!("{key}={bucket}: {w}"));
        }
        reports.insert(bucket, report);
    }
    (reports, warnings)
}

/// The complete metrics output for one run: overall numbers plus the three
/// breakdowns, with every degradation note collected in `warnings`.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub model: String,
    pub overall: GroupReport,
    pub per_domain: BTreeMap<String, GroupReport>,
    pub per_group_size: BTreeMap<u64, GroupReport>,
    pub per_task: BTreeMap<String, GroupReport>,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn build(model: impl Into<String>, records: &[OutcomeRecord]) -> Self {
        let mut warnings = Vec::new();
        let mut overall_sets: BTreeMap<Protocol, OutcomeSet> = BTreeMap::new();
        for record in records {
            insert_record(&mut overall_sets, record, "overall", &mut warnings);
        }
        let refs: Vec<&OutcomeSet> = overall_sets.values().collect();
        let (overall, overall_warnings) = build_group_report(&refs);
        warnings.extend(overall_warnings);

        let (per_domain, w) = breakdown(records, GroupKey::Domain);
        warnings.extend(w);
        let (per_size_raw, w) = breakdown(records, GroupKey::GroupSize);
        warnings.extend(w);
        let per_group_size = per_size_raw
            .into_iter()
            .map(|(k, v)| (k.parse::<u64>().expect("group-size buckets are numeric"), v))
            .collect();
        let (per_task, w) = breakdown(records, GroupKey::Task);
        warnings.extend(w);

        MetricsReport {
            model: model.into(),
            overall,
            per_domain,
            per_group_size,
            per_task,
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,protocol,group_key,group_value,metric,numerator,denominator,value\n");
        self.csv_group(&mut out, "overall", "all", &self.overall);
        for (domain, report) in &self.per_domain {
            self.csv_group(&mut out, "domain", domain, report);
        }
        for (size, report) in &self.per_group_size {
            self.csv_group(&mut out, "group_size", &size.to_string(), report);
        }
        for (task, report) in &self.per_task {
            self.csv_group(&mut out, "task", task, report);
        }
        out
    }

    fn csv_group(&self, out: &mut String, key: &str, value: &str, report: &GroupReport) {
        for (protocol, metrics) in &report.per_protocol {
            self.csv_row(out, protocol.as_str(), key, value, "err", metrics.err);
            if let Some(sigma) = metrics.sigma {
                self.csv_row(out, protocol.as_str(), key, value, "sigma", sigma);
            }
        }
        if let Some(sigma_max) = report.sigma_max {
            self.csv_row(out, "all", key, value, "sigma_max", sigma_max);
        }
    }

    fn csv_row(&self, out: &mut String, protocol: &str, key: &str, value: &str, metric: &str, ratio: Ratio) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            csv_field(&self.model),
            protocol,
            key,
            csv_field(value),
            metric,
            ratio.num,
            ratio.den,
            ratio.render()
        ));
    }

    /// Percent tables, misleading protocols as paired Err/σ columns.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("# Collective memory report\n\n");
        out.push_str(&format!("Model: `{}`\n\n", self.model));
        out.push_str("## Overall (%)\n\n");
        render_markdown_table(&mut out, "Model", &[(self.model.clone(), &self.overall)]);
        if !self.per_domain.is_empty() {
            out.push_str("\n## By domain (%)\n\n");
            let rows: Vec<(String, &GroupReport)> =
                self.per_domain.iter().map(|(k, v)| (k.clone(), v)).collect();
            render_markdown_table(&mut out, "Domain", &rows);
        }
        if !self.per_group_size.is_empty() {
            out.push_str("\n## By group size (%)\n\n");
            let rows: Vec<(String, &GroupReport)> =
                self.per_group_size.iter().map(|(k, v)| (k.to_string(), v)).collect();
            render_markdown_table(&mut out, "Group size", &rows);
        }
        if !self.per_task.is_empty() {
            out.push_str("\n## By task (%)\n\n");
            let rows: Vec<(String, &GroupReport)> =
                self.per_task.iter().map(|(k, v)| (k.clone(), v)).collect();
            render_markdown_table(&mut out, "Task", &rows);
        }
        if !self.warnings.is_empty() {
            out.push_str("\n## Warnings\n\n");
            for w in &self.warnings {
                out.push_str(&format!("- {w}\n"));
            }
        }
        out
    }
}

fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') || value.contains('\n') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn render_markdown_table(out: &mut String, row_label: &str, rows: &[(String, &GroupReport)]) {
    let mut protocols: BTreeSet<Protocol> = BTreeSet::new();
    for (_, report) in rows {
        protocols.extend(report.per_protocol.keys().copied());
    }
    let mut header = format!("| {row_label} |");
    let mut rule = String::from("| --- |");
    for protocol in &protocols {
        header.push_str(&format!(" Err^{protocol} |"));
        rule.push_str(" ---: |");
        if *protocol != Protocol::B {
            header.push_str(&format!(" σ^{protocol} |"));
            rule.push_str(" ---: |");
        }
    }
    header.push_str(" σ_max |");
    rule.push_str(" ---: |");
    out.push_str(&header);
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for (label, report) in rows {
        let mut line = format!("| {label} |");
        for protocol in &protocols {
            match report.per_protocol.get(protocol) {
                Some(metrics) => {
                    line.push_str(&format!(" {} |", metrics.err.render_percent()));
                    if *protocol != Protocol::B {
                        match metrics.sigma {
                            Some(sigma) => line.push_str(&format!(" {} |", sigma.render_percent())),
                            None => line.push_str(" n/a |"),
                        }
                    }
                }
                None => {
                    line.push_str(" n/a |");
                    if *protocol != Protocol::B {
                        line.push_str(" n/a |");
                    }
                }
            }
        }
        match report.sigma_max {
            Some(sigma_max) => line.push_str(&format!(" {} |", sigma_max.render_percent())),
            None => line.push_str(" n/a |"),
        }
        out.push_str(&line);
        out.push('\n');
    }
}
