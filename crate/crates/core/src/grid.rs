//! Grid data model, the TOML grid file format, and the nodal admittance
//! matrix `Y = G + jB`.
//!
//! A [`GridModel`] is always canonical: the slack bus sits at index 0 and
//! the remaining buses follow in ascending order of their file index,
//! renumbered `1..N`. Branch endpoints are remapped to match.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Load,
}

/// One bus with its fixed injections, all in per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub index: usize,
    pub kind: BusKind,
    pub p_gen: f64,
    pub q_gen: f64,
    pub p_dem: f64,
    pub q_dem: f64,
}

impl Bus {
    /// Net specified active injection `P^G - P^D`.
    pub fn p_net(&self) -> f64 {
        self.p_gen - self.p_dem
    }

    /// Net specified reactive injection `Q^G - Q^D`.
    pub fn q_net(&self) -> f64 {
        self.q_gen - self.q_dem
    }
}

/// A pi-model line: series admittance plus half the charging susceptance at
/// each end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub series_g: f64,
    pub series_b: f64,
    #[serde(default)]
    pub shunt_b_half: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlackVoltage {
    pub mu: f64,
    pub omega: f64,
}

impl Default for SlackVoltage {
    fn default() -> Self {
        Self {
            mu: 1.0,
            omega: 0.0,
        }
    }
}

/// On-disk layout of a grid file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridFile {
    #[serde(default = "default_base_mva")]
    base_mva: f64,
    slack_voltage: SlackVoltage,
    buses: Vec<Bus>,
    #[serde(default)]
    branches: Vec<Branch>,
}

fn default_base_mva() -> f64 {
    100.0
}

/// Immutable, canonical grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    g: DMatrix<f64>,
    b: DMatrix<f64>,
    slack_voltage: SlackVoltage,
}

impl GridModel {
    /// Validates and canonicalizes the raw data, then builds the admittance
    /// matrix. Bus indices may be any distinct integers; branches refer to
    /// them by those indices.
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        slack_voltage: SlackVoltage,
    ) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::InvalidField {
                field: "buses".into(),
                reason: "grid has no buses".into(),
            });
        }
        check_finite("base_mva", base_mva)?;
        check_finite("slack_voltage.mu", slack_voltage.mu)?;
        check_finite("slack_voltage.omega", slack_voltage.omega)?;

        let mut slack = None;
        for (pos, bus) in buses.iter().enumerate() {
            for (name, value) in [
                ("p_gen", bus.p_gen),
                ("q_gen", bus.q_gen),
                ("p_dem", bus.p_dem),
                ("q_dem", bus.q_dem),
            ] {
                check_finite(&format!("buses[{pos}].{name}"), value)?;
            }
            if bus.kind == BusKind::Slack {
                if slack.is_some() {
                    return Err(Error::MultipleSlack);
                }
                slack = Some(bus.index);
            }
        }
        let slack = slack.ok_or(Error::NoSlack)?;

        let mut ids: Vec<usize> = buses.iter().map(|b| b.index).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateBus(w[0]));
        }
        // canonical order: slack first, then ascending file index
        let order: Vec<usize> = std::iter::once(slack)
            .chain(ids.iter().copied().filter(|&id| id != slack))
            .collect();
        let position = |id: usize| order.iter().position(|&o| o == id);

        let mut canonical: Vec<Bus> = order
            .iter()
            .map(|&id| buses.iter().find(|b| b.index == id).unwrap().clone())
            .collect();
        for (pos, bus) in canonical.iter_mut().enumerate() {
            bus.index = pos;
        }

        let n = canonical.len();
        let mut mapped = Vec::with_capacity(branches.len());
        for (k, br) in branches.iter().enumerate() {
            for (name, value) in [
                ("series_g", br.series_g),
                ("series_b", br.series_b),
                ("shunt_b_half", br.shunt_b_half),
            ] {
                check_finite(&format!("branches[{k}].{name}"), value)?;
            }
            let from = position(br.from).ok_or(Error::BranchIndex {
                branch: k,
                index: br.from,
                n,
            })?;
            let to = position(br.to).ok_or(Error::BranchIndex {
                branch: k,
                index: br.to,
                n,
            })?;
            mapped.push(Branch {
                from,
                to,
                ..br.clone()
            });
        }

        let (g, b) = build_admittance(&mapped, n)?;
        Ok(Self {
            base_mva,
            buses: canonical,
            branches: mapped,
            g,
            b,
            slack_voltage,
        })
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Conductance matrix `G`.
    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Susceptance matrix `B`.
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn slack_voltage(&self) -> SlackVoltage {
        self.slack_voltage
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    /// Serializes to the grid file format. Loading the output yields an
    /// identical model.
    pub fn to_toml(&self) -> String {
        let file = GridFile {
            base_mva: self.base_mva,
            slack_voltage: self.slack_voltage,
            buses: self.buses.clone(),
            branches: self.branches.clone(),
        };
        toml::to_string(&file).expect("grid model serializes")
    }
}

fn check_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidField {
            field: field.to_string(),
            reason: format!("value {value} is not finite"),
        })
    }
}

/// Builds `G` and `B` from pi-model branches over `n` buses.
///
/// Off-diagonals accumulate the negated series admittance of every branch
/// between the pair. Diagonals accumulate the series admittance of every
/// incident branch plus `j * shunt_b_half` per branch end.
pub fn build_admittance(branches: &[Branch], n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut g = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for (k, br) in branches.iter().enumerate() {
        for index in [br.from, br.to] {
            if index >= n {
                return Err(Error::BranchIndex {
                    branch: k,
                    index,
                    n,
                });
            }
        }
        if br.from == br.to {
            return Err(Error::SelfLoop(k));
        }
        let (i, j) = (br.from, br.to);
        g[(i, j)] -= br.series_g;
        g[(j, i)] -= br.series_g;
        b[(i, j)] -= br.series_b;
        b[(j, i)] -= br.series_b;
        g[(i, i)] += br.series_g;
        g[(j, j)] += br.series_g;
        b[(i, i)] += br.series_b + br.shunt_b_half;
        b[(j, j)] += br.series_b + br.shunt_b_half;
    }
    Ok((g, b))
}

/// Parses a grid file and returns the canonical model.
pub fn load_grid(text: &str) -> Result<GridModel> {
    let file: GridFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    GridModel::new(file.base_mva, file.buses, file.branches, file.slack_voltage)
}
