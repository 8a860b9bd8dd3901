//! RDS survey records and the validated recruitment forest.
//!
//! Input CSV layout: `id,recruiter_id,degree,order,<trait>...`. An empty
//! `recruiter_id` marks a seed and an empty trait cell is a missing value.
//! When every `order` cell is filled the rows are ranked by it (ties keep
//! file order); when every cell is empty the file order is used.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_MAX_COUPONS: usize = 3;
const FIXED_COLUMNS: [&str; 4] = ["id", "recruiter_id", "degree", "order"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Respondent {
    pub id: String,
    pub recruiter_id: Option<String>,
    /// Self-reported network size (visibility).
    pub degree: u32,
    /// Values keyed by trait name; the schema's missing token marks absence.
    pub traits: BTreeMap<String, String>,
    /// 1-based position in chronological recruitment order.
    pub sample_order: usize,
}

/// Allowed category labels per trait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitSchema {
    pub traits: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub missing: String,
}

impl TraitSchema {
    pub fn new(traits: BTreeMap<String, Vec<String>>) -> Self {
        TraitSchema {
            traits,
            missing: String::new(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn categories(&self, trait_name: &str) -> Result<&[String]> {
        self.traits
            .get(trait_name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownTrait(trait_name.to_string()))
    }

    pub fn is_missing(&self, value: &str) -> bool {
        value == self.missing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegreeImputation {
    Median,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub impute_degree: Option<DegreeImputation>,
    pub max_coupons: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            impute_degree: None,
            max_coupons: DEFAULT_MAX_COUPONS,
        }
    }
}

/// Validated, immutable recruitment forest. Respondents are stored in
/// sample order, so index `i` holds the respondent with `sample_order == i + 1`.
#[derive(Debug, Clone)]
pub struct RecruitmentForest {
    respondents: Vec<Respondent>,
    schema: TraitSchema,
    max_coupons: usize,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    seeds: Vec<usize>,
    warnings: Vec<String>,
}

impl RecruitmentForest {
    /// Validate respondents against every forest invariant.
    pub fn new(
        mut respondents: Vec<Respondent>,
        schema: TraitSchema,
        max_coupons: usize,
    ) -> Result<Self> {
        let n = respondents.len();
        let mut index = HashMap::with_capacity(n);
        for (i, r) in respondents.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        for r in &respondents {
            if r.degree == 0 {
                return Err(Error::Invalid(format!(
                    "respondent `{}` has degree 0",
                    r.id
                )));
            }
            if let Some(rec) = &r.recruiter_id {
                if !index.contains_key(rec) {
                    return Err(Error::DanglingRecruiter {
                        id: r.id.clone(),
                        recruiter: rec.clone(),
                    });
                }
            }
            for (name, value) in &r.traits {
                let allowed = schema.categories(name)?;
                if !schema.is_missing(value) && !allowed.contains(value) {
                    return Err(Error::UnknownLabel {
                        trait_name: name.clone(),
                        label: value.clone(),
                        line: r.sample_order,
                    });
                }
            }
        }
        detect_cycles(&respondents, &index)?;

        let mut seen = vec![false; n];
        for r in &respondents {
            if r.sample_order == 0 || r.sample_order > n || seen[r.sample_order - 1] {
                return Err(Error::Invalid(
                    "sample_order values must be a permutation of 1..n".into(),
                ));
            }
            seen[r.sample_order - 1] = true;
        }
        respondents.sort_by_key(|r| r.sample_order);
        let index: HashMap<String, usize> = respondents
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();

        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut seeds = Vec::new();
        for (i, r) in respondents.iter().enumerate() {
            match &r.recruiter_id {
                Some(rec) => {
                    let p = index[rec];
                    if p >= i {
                        return Err(Error::Invalid(format!(
                            "respondent `{}` precedes its recruiter `{}` in sample order",
                            r.id, rec
                        )));
                    }
                    parent[i] = Some(p);
                    children[p].push(i);
                }
                None => seeds.push(i),
            }
        }
        let mut warnings = Vec::new();
        for (i, kids) in children.iter().enumerate() {
            if kids.len() > max_coupons {
                let msg = format!(
                    "respondent `{}` recruited {} people, more than the {} coupon limit",
                    respondents[i].id,
                    kids.len(),
                    max_coupons
                );
                warn!("{msg}");
                warnings.push(msg);
            }
        }
        Ok(RecruitmentForest {
            respondents,
            schema,
            max_coupons,
            index,
            parent,
            children,
            seeds,
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.respondents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.respondents.is_empty()
    }

    pub fn respondents(&self) -> &[Respondent] {
        &self.respondents
    }

    pub fn schema(&self) -> &TraitSchema {
        &self.schema
    }

    pub fn max_coupons(&self) -> usize {
        self.max_coupons
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn seeds(&self) -> &[usize] {
        &self.seeds
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn recruiter_of(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn recruits_of(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.respondents.iter().map(|r| r.degree).collect()
    }

    /// Trait value of respondent `i`, `None` when missing.
    pub fn trait_value(&self, i: usize, trait_name: &str) -> Option<&str> {
        self.respondents[i]
            .traits
            .get(trait_name)
            .map(String::as_str)
            .filter(|v| !self.schema.is_missing(v))
    }

    /// Chain depth of a respondent: seeds are wave 0.
    pub fn wave_of(&self, id: &str) -> Result<usize> {
        let mut i = self.index_of(id)?;
        let mut wave = 0;
        while let Some(p) = self.parent[i] {
            wave += 1;
            i = p;
        }
        Ok(wave)
    }

    /// Waves of every respondent in sample order.
    pub fn waves(&self) -> Vec<usize> {
        let mut waves = vec![0; self.len()];
        // Recruiters precede recruits, so one forward pass suffices.
        for i in 0..self.len() {
            if let Some(p) = self.parent[i] {
                waves[i] = waves[p] + 1;
            }
        }
        waves
    }

    /// Number of respondents in each seed's tree, aligned with [`Self::seeds`].
    pub fn seed_tree_sizes(&self) -> Vec<usize> {
        let mut root = vec![0usize; self.len()];
        for i in 0..self.len() {
            root[i] = match self.parent[i] {
                Some(p) => root[p],
                None => i,
            };
        }
        self.seeds
            .iter()
            .map(|&s| root.iter().filter(|&&r| r == s).count())
            .collect()
    }

    /// Sub-forest of respondents whose `trait_name` equals `value`.
    ///
    /// Relative sample order is preserved and renumbered from 1. A recruiter
    /// outside the subset is dropped, which makes the recruit a seed of the view.
    pub fn subset_by_trait(&self, trait_name: &str, value: &str) -> Result<RecruitmentForest> {
        self.schema.categories(trait_name)?;
        let keep: BTreeSet<usize> = (0..self.len())
            .filter(|&i| self.trait_value(i, trait_name) == Some(value))
            .collect();
        let mut out = Vec::with_capacity(keep.len());
        for (k, &i) in keep.iter().enumerate() {
            let mut r = self.respondents[i].clone();
            r.sample_order = k + 1;
            r.recruiter_id = self.parent[i]
                .filter(|p| keep.contains(p))
                .map(|p| self.respondents[p].id.clone());
            out.push(r);
        }
        RecruitmentForest::new(out, self.schema.clone(), self.max_coupons)
    }

    /// Write the forest in the input CSV schema.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let trait_names: Vec<&String> = self.schema.traits.keys().collect();
        let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
        header.extend(trait_names.iter().map(|s| s.as_str()));
        w.write_record(&header)?;
        for r in &self.respondents {
            let mut row = vec![
                r.id.clone(),
                r.recruiter_id.clone().unwrap_or_default(),
                r.degree.to_string(),
                r.sample_order.to_string(),
            ];
            for t in &trait_names {
                row.push(
                    r.traits
                        .get(*t)
                        .cloned()
                        .unwrap_or_else(|| self.schema.missing.clone()),
                );
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn detect_cycles(respondents: &[Respondent], index: &HashMap<String, usize>) -> Result<()> {
    // 0 = unvisited, 1 = on current path, 2 = known acyclic
    let mut state = vec![0u8; respondents.len()];
    for start in 0..respondents.len() {
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            match state[i] {
                2 => break,
                1 => return Err(Error::Cycle(respondents[i].id.clone())),
                _ => {}
            }
            state[i] = 1;
            path.push(i);
            cur = respondents[i].recruiter_id.as_ref().map(|r| index[r]);
        }
        for i in path {
            state[i] = 2;
        }
    }
    Ok(())
}

/// Parse a dataset file. With `schema == None` the schema is inferred from
/// the data: every observed label becomes an allowed category.
pub fn parse_dataset(
    path: impl AsRef<Path>,
    schema: Option<&TraitSchema>,
    opts: &ParseOptions,
) -> Result<RecruitmentForest> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, schema, opts)
}

pub fn read_dataset<R: Read>(
    reader: R,
    schema: Option<&TraitSchema>,
    opts: &ParseOptions,
) -> Result<RecruitmentForest> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < FIXED_COLUMNS.len()
        || header[..FIXED_COLUMNS.len()]
            .iter()
            .zip(FIXED_COLUMNS)
            .any(|(h, want)| h != want)
    {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!(
                "header must start with `{}`, found `{}`",
                FIXED_COLUMNS.join(","),
                header.join(",")
            ),
        });
    }
    let trait_names = header[FIXED_COLUMNS.len()..].to_vec();
    let missing = schema.map(|s| s.missing.clone()).unwrap_or_default();
    if let Some(s) = schema {
        for t in &trait_names {
            if !s.traits.contains_key(t) {
                return Err(Error::UnknownTrait(t.clone()));
            }
        }
    }

    struct RawRow {
        line: usize,
        id: String,
        recruiter: Option<String>,
        degree: Option<u32>,
        order: Option<f64>,
        traits: BTreeMap<String, String>,
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::MalformedRow {
                line,
                message: "empty id".into(),
            });
        }
        let recruiter = Some(record[1].to_string()).filter(|s| !s.is_empty());
        let degree = match &record[2] {
            "" => None,
            s => match s.parse::<u32>() {
                Ok(0) => {
                    return Err(Error::MalformedRow {
                        line,
                        message: "degree must be at least 1".into(),
                    })
                }
                Ok(d) => Some(d),
                Err(_) => {
                    return Err(Error::MalformedRow {
                        line,
                        message: format!("degree `{s}` is not a positive integer"),
                    })
                }
            },
        };
        let order = match &record[3] {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| Error::MalformedRow {
                line,
                message: format!("order `{s}` is not numeric"),
            })?),
        };
        let mut traits = BTreeMap::new();
        for (k, name) in trait_names.iter().enumerate() {
            let value = record[FIXED_COLUMNS.len() + k].to_string();
            if let Some(s) = schema {
                if !s.is_missing(&value) && !s.traits[name].contains(&value) {
                    return Err(Error::UnknownLabel {
                        trait_name: name.clone(),
                        label: value,
                        line,
                    });
                }
            }
            traits.insert(name.clone(), value);
        }
        rows.push(RawRow {
            line,
            id,
            recruiter,
            degree,
            order,
            traits,
        });
    }

    if rows.iter().any(|r| r.degree.is_none()) {
        match opts.impute_degree {
            None => {
                let r = rows.iter().find(|r| r.degree.is_none()).unwrap();
                return Err(Error::MalformedRow {
                    line: r.line,
                    message: "missing degree (use median imputation to fill it)".into(),
                });
            }
            Some(DegreeImputation::Median) => {
                let mut known: Vec<u32> = rows.iter().filter_map(|r| r.degree).collect();
                if known.is_empty() {
                    return Err(Error::Invalid("no observed degrees to impute from".into()));
                }
                known.sort_unstable();
                let m = known.len();
                let median = if m % 2 == 1 {
                    known[m / 2]
                } else {
                    (known[m / 2 - 1] + known[m / 2]).div_ceil(2)
                };
                for r in rows.iter_mut().filter(|r| r.degree.is_none()) {
                    warn!("line {}: imputing degree {median}", r.line);
                    r.degree = Some(median);
                }
            }
        }
    }

    let with_order = rows.iter().filter(|r| r.order.is_some()).count();
    let mut ranking: Vec<usize> = (0..rows.len()).collect();
    if with_order == rows.len() && !rows.is_empty() {
        ranking.sort_by(|&a, &b| {
            rows[a]
                .order
                .unwrap()
                .partial_cmp(&rows[b].order.unwrap())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
    } else if with_order != 0 {
        let r = rows.iter().find(|r| r.order.is_none()).unwrap();
        return Err(Error::MalformedRow {
            line: r.line,
            message: "order column must be filled on every row or on none".into(),
        });
    }
    let mut sample_order = vec![0; rows.len()];
    for (rank, &row) in ranking.iter().enumerate() {
        sample_order[row] = rank + 1;
    }

    let schema = match schema {
        Some(s) => s.clone(),
        None => {
            let mut traits = BTreeMap::new();
            for name in &trait_names {
                let labels: BTreeSet<String> = rows
                    .iter()
                    .map(|r| r.traits[name].clone())
                    .filter(|v| *v != missing)
                    .collect();
                traits.insert(name.clone(), labels.into_iter().collect());
            }
            TraitSchema {
                traits,
                missing: missing.clone(),
            }
        }
    };

    let respondents = rows
        .into_iter()
        .zip(sample_order)
        .map(|(r, order)| Respondent {
            id: r.id,
            recruiter_id: r.recruiter,
            degree: r.degree.expect("degrees filled above"),
            traits: r.traits,
            sample_order: order,
        })
        .collect();
    RecruitmentForest::new(respondents, schema, opts.max_coupons)
}
