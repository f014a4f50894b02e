//! On-disk and on-wire formats (version `"1"`).
//!
//! Files are JSON. Alternatives are written in set notation (`"{β}"`,
//! `"{}"`, `"1"`, `"0"`), interval influences as `{"inf": …, "sup": …}` and
//! unknown influences as `"symbolic"`. Influence matrices are row-major:
//! `matrix[source][target]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebra::ActionUniverse;
use crate::error::{Error, Result};
use crate::group::{Relation, RelationshipGraph};
use crate::scenario::{EditMode, Scenario, Stage, StructureEdit, Vote, VoteRule};
use crate::solver::{InfluenceMatrix, InfluenceValue, SessionOptions, DEFAULT_ENUMERATION_BOUND};
use crate::subject::SubjectId;

pub const FORMAT_VERSION: &str = "1";

fn default_bound() -> u64 {
    DEFAULT_ENUMERATION_BOUND
}

fn check_version(version: &str) -> Result<()> {
    if version == FORMAT_VERSION {
        Ok(())
    } else {
        Err(Error::Schema(format!(
            "unsupported format_version `{version}`, expected `{FORMAT_VERSION}`"
        )))
    }
}

fn subject(name: &str) -> Result<SubjectId> {
    SubjectId::new(name)
}

/// One matrix cell or point of view as written in a file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InfluenceSpec {
    /// `"symbolic"` or an alternative in set notation.
    Text(String),
    Interval {
        inf: String,
        sup: String,
    },
}

impl InfluenceSpec {
    pub fn resolve(&self, universe: &ActionUniverse) -> Result<InfluenceValue> {
        match self {
            InfluenceSpec::Text(t) if t.trim() == "symbolic" => Ok(InfluenceValue::Symbolic),
            InfluenceSpec::Text(t) => Ok(InfluenceValue::Concrete(universe.parse_alternative(t)?)),
            InfluenceSpec::Interval { inf, sup } => InfluenceValue::interval(
                universe.parse_alternative(inf)?,
                universe.parse_alternative(sup)?,
            ),
        }
    }
}

pub type MatrixSpec = BTreeMap<String, BTreeMap<String, InfluenceSpec>>;

fn resolve_matrix(
    spec: &MatrixSpec,
    subjects: &[SubjectId],
    universe: &ActionUniverse,
) -> Result<InfluenceMatrix> {
    let mut entries = Vec::new();
    for (source, row) in spec {
        for (target, value) in row {
            entries.push((subject(source)?, subject(target)?, value.resolve(universe)?));
        }
    }
    InfluenceMatrix::new(subjects.to_vec(), entries)
}

/// Subjects and relations; read leniently so any session or scenario file
/// also works as a graph file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFile {
    pub subjects: Vec<String>,
    #[serde(default)]
    pub relations: Vec<(String, String, Relation)>,
}

impl GraphFile {
    pub fn to_graph(&self) -> Result<RelationshipGraph> {
        let subjects = self
            .subjects
            .iter()
            .map(|s| subject(s))
            .collect::<Result<Vec<_>>>()?;
        let relations = self
            .relations
            .iter()
            .map(|(a, b, r)| Ok((subject(a)?, subject(b)?, *r)))
            .collect::<Result<Vec<_>>>()?;
        RelationshipGraph::new(subjects, relations)
    }
}

/// A single session: the `solve` command input and the solve endpoint body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionFile {
    pub format_version: String,
    pub universe: Vec<String>,
    pub subjects: Vec<String>,
    #[serde(default)]
    pub relations: Vec<(String, String, Relation)>,
    pub matrix: MatrixSpec,
    #[serde(default = "default_bound")]
    pub enumeration_bound: u64,
}

/// A session file resolved against its universe.
#[derive(Debug, Clone)]
pub struct Session {
    pub universe: ActionUniverse,
    pub graph: RelationshipGraph,
    pub matrix: InfluenceMatrix,
    pub options: SessionOptions,
}

impl Session {
    pub fn solve(&self) -> Result<crate::solver::SessionResult> {
        let polynomial = self.graph.decompose()?;
        crate::solver::solve_session(&self.universe, &polynomial, &self.matrix, self.options)
    }
}

impl SessionFile {
    pub fn resolve(&self) -> Result<Session> {
        check_version(&self.format_version)?;
        let universe = ActionUniverse::new(self.universe.iter().cloned())?;
        let graph = GraphFile {
            subjects: self.subjects.clone(),
            relations: self.relations.clone(),
        }
        .to_graph()?;
        let matrix = resolve_matrix(&self.matrix, graph.subjects(), &universe)?;
        Ok(Session {
            universe,
            graph,
            matrix,
            options: SessionOptions {
                enumeration_bound: self.enumeration_bound,
                ..SessionOptions::default()
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditSpec {
    RemoveSubject(String),
    SetRelation(String, String, Relation),
    StartFinalSession,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSpec {
    #[default]
    Unanimity,
    Decider(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteSpec {
    pub universe: Vec<String>,
    pub matrix: MatrixSpec,
    #[serde(default)]
    pub rule: RuleSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    #[default]
    Direct,
    Vote(VoteSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageSpec {
    Influence {
        matrix: MatrixSpec,
    },
    Structure {
        edit: EditSpec,
        #[serde(default)]
        mode: ModeSpec,
    },
    Final {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        enumeration_bound: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: String,
    pub universe: Vec<String>,
    pub subjects: Vec<String>,
    #[serde(default)]
    pub relations: Vec<(String, String, Relation)>,
    /// Points of view held before the first stage.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub points_of_view: BTreeMap<String, InfluenceSpec>,
    pub stages: Vec<StageSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parallel_blocks: Vec<Vec<usize>>,
    #[serde(default = "default_bound")]
    pub enumeration_bound: u64,
}

impl ScenarioFile {
    /// Replaces the scenario-wide bound and every final-session bound.
    pub fn with_bound(mut self, bound: u64) -> Self {
        self.enumeration_bound = bound;
        for stage in &mut self.stages {
            if let StageSpec::Final { enumeration_bound } = stage {
                *enumeration_bound = Some(bound);
            }
        }
        self
    }

    pub fn resolve(&self) -> Result<Scenario> {
        check_version(&self.format_version)?;
        let universe = ActionUniverse::new(self.universe.iter().cloned())?;
        let graph = GraphFile {
            subjects: self.subjects.clone(),
            relations: self.relations.clone(),
        }
        .to_graph()?;

        // Subjects referenced by later stages may already be gone, so matrices
        // are validated against the graph at the time the stage runs; here
        // they are resolved against every subject that was ever declared.
        let mut stages = Vec::with_capacity(self.stages.len());
        for spec in &self.stages {
            stages.push(match spec {
                StageSpec::Influence { matrix } => Stage::InfluenceFormation {
                    matrix: MatrixDraft::new(matrix, &universe)?,
                },
                StageSpec::Structure { edit, mode } => Stage::StructureEdit {
                    edit: match edit {
                        EditSpec::RemoveSubject(s) => StructureEdit::RemoveSubject(subject(s)?),
                        EditSpec::SetRelation(a, b, r) => {
                            StructureEdit::SetRelation(subject(a)?, subject(b)?, *r)
                        }
                        EditSpec::StartFinalSession => StructureEdit::StartFinalSession,
                    },
                    mode: match mode {
                        ModeSpec::Direct => EditMode::Direct,
                        ModeSpec::Vote(vote) => {
                            let vote_universe = ActionUniverse::new(vote.universe.iter().cloned())?;
                            EditMode::Vote(Vote {
                                matrix: MatrixDraft::new(&vote.matrix, &vote_universe)?,
                                universe: vote_universe,
                                rule: match &vote.rule {
                                    RuleSpec::Unanimity => VoteRule::Unanimity,
                                    RuleSpec::Decider(s) => VoteRule::DeciderIs(subject(s)?),
                                },
                            })
                        }
                    },
                },
                StageSpec::Final { enumeration_bound } => Stage::FinalSession {
                    enumeration_bound: enumeration_bound.unwrap_or(self.enumeration_bound),
                },
            });
        }

        let mut points_of_view = BTreeMap::new();
        for (name, spec) in &self.points_of_view {
            let id = subject(name)?;
            if !graph.contains(&id) {
                return Err(Error::UnknownSubject(name.clone()));
            }
            points_of_view.insert(id, spec.resolve(&universe)?.normalized());
        }

        Scenario::new(
            universe,
            graph,
            stages,
            self.parallel_blocks.clone(),
            points_of_view,
            self.enumeration_bound,
        )
    }
}

/// Matrix entries resolved against a universe but not yet against a group:
/// the group a stage sees depends on the stages before it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixDraft {
    entries: Vec<(SubjectId, SubjectId, InfluenceValue)>,
}

impl MatrixDraft {
    pub fn new(spec: &MatrixSpec, universe: &ActionUniverse) -> Result<Self> {
        let mut entries = Vec::new();
        for (source, row) in spec {
            for (target, value) in row {
                entries.push((subject(source)?, subject(target)?, value.resolve(universe)?));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_matrix(matrix: &InfluenceMatrix) -> Self {
        Self {
            entries: matrix
                .entries()
                .map(|(s, t, v)| (s.clone(), t.clone(), v.clone()))
                .collect(),
        }
    }

    /// Builds the matrix over exactly `subjects`.
    pub fn bind(&self, subjects: &[SubjectId]) -> Result<InfluenceMatrix> {
        InfluenceMatrix::new(subjects.to_vec(), self.entries.iter().cloned())
    }
}

/// Parses a JSON document, mapping syntax and shape errors to `Schema`.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
}
