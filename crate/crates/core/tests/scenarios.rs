mod common;

use std::collections::BTreeMap;

use common::{fixture, sid};
use rgt_core::scenario::{
    apply_choices, run_final_stage, run_influence_stage, run_structure_stage, EditMode,
    StageRecord, StructureEdit, Vote, VoteRule,
};
use rgt_core::schema::{from_json, MatrixDraft, MatrixSpec};
use rgt_core::solver::IntervalKind;
use rgt_core::{
    run_scenario, ActionUniverse, Alternative, InfluenceValue, Relation, Scenario, ScenarioFile,
    ScenarioRun, ScenarioState, SubjectId, SymbolicExpr,
};
use serde_json::json;

fn scenario(value: serde_json::Value) -> rgt_core::Result<Scenario> {
    from_json::<ScenarioFile>(&value.to_string())?.resolve()
}

fn load(name: &str) -> Scenario {
    from_json::<ScenarioFile>(&fixture(name))
        .unwrap()
        .resolve()
        .unwrap()
}

fn example_relations() -> serde_json::Value {
    json!([
        ["a", "b", "alliance"],
        ["a", "d", "alliance"],
        ["b", "d", "alliance"],
        ["c", "a", "conflict"],
        ["c", "b", "conflict"],
        ["c", "d", "conflict"]
    ])
}

fn rows(values: &[(&str, serde_json::Value)]) -> serde_json::Value {
    let mut out = serde_json::Map::new();
    for (s, v) in values {
        let row: serde_json::Map<String, serde_json::Value> = values
            .iter()
            .filter(|(t, _)| t != s)
            .map(|(t, _)| (t.to_string(), v.clone()))
            .collect();
        out.insert(s.to_string(), row.into());
    }
    out.into()
}

fn table1() -> serde_json::Value {
    rows(&[
        ("a", json!("{α}")),
        ("b", json!("{α}")),
        ("c", json!("{β}")),
        ("d", json!("{γ}")),
    ])
}

fn draft(u: &ActionUniverse, value: serde_json::Value) -> MatrixDraft {
    let spec: MatrixSpec = serde_json::from_value(value).unwrap();
    MatrixDraft::new(&spec, u).unwrap()
}

fn alt(u: &ActionUniverse, text: &str) -> Alternative {
    u.parse_alternative(text).unwrap()
}

fn expr(u: &ActionUniverse, text: &str) -> SymbolicExpr {
    SymbolicExpr::parse(text, u).unwrap()
}

fn state_with(
    subjects: &[&str],
    relations: serde_json::Value,
    povs: serde_json::Value,
) -> ScenarioState {
    let sc = scenario(json!({
        "format_version": "1",
        "universe": ["α", "β", "γ"],
        "subjects": subjects,
        "relations": relations,
        "points_of_view": povs,
        "stages": [{"type": "final"}]
    }))
    .unwrap();
    sc.initial_state()
}

fn example1_start() -> ScenarioState {
    load("example1_two_stage.json").initial_state()
}

fn example2_vote(c_value: &str, rule: VoteRule) -> EditMode {
    let vote_u = ActionUniverse::new(["exclude_d"]).unwrap();
    let matrix = draft(
        &vote_u,
        rows(&[
            ("a", json!("symbolic")),
            ("b", json!("symbolic")),
            ("c", json!(c_value)),
            ("d", json!("symbolic")),
        ]),
    );
    EditMode::Vote(Vote {
        universe: vote_u,
        matrix,
        rule,
    })
}

#[test]
fn influence_stage_forms_table3_points_of_view() {
    let state = example1_start();
    let u = state.universe.clone();
    let next = run_influence_stage(&state, &draft(&u, table1())).unwrap();
    let expected = BTreeMap::from([
        (sid("a"), InfluenceValue::Concrete(alt(&u, "{β}"))),
        (sid("b"), InfluenceValue::Concrete(alt(&u, "{β}"))),
        (
            sid("c"),
            InfluenceValue::interval(u.zero(), u.one()).unwrap(),
        ),
        (
            sid("d"),
            InfluenceValue::interval(alt(&u, "{β}"), alt(&u, "{α, β}")).unwrap(),
        ),
    ]);
    assert_eq!(next.points_of_view, expected);
}

#[test]
fn shared_point_of_view_is_a_fixed_point() {
    let state = example1_start();
    let u = state.universe.clone();
    let all_beta = rows(&[
        ("a", json!("{β}")),
        ("b", json!("{β}")),
        ("c", json!("{β}")),
        ("d", json!("{β}")),
    ]);
    let once = run_influence_stage(&state, &draft(&u, all_beta.clone())).unwrap();
    let beta = InfluenceValue::Concrete(alt(&u, "{β}"));
    for s in ["a", "b", "d"] {
        assert_eq!(once.points_of_view[&sid(s)], beta);
    }
    // Re-solving from the formed state with the same influences changes nothing.
    let twice = run_influence_stage(&once, &draft(&u, all_beta)).unwrap();
    assert_eq!(twice.points_of_view, once.points_of_view);
}

#[test]
fn influence_stage_on_a_non_decomposable_group_fails() {
    let state = example1_start();
    let u = state.universe.clone();
    let step1 = run_structure_stage(
        &state,
        &StructureEdit::SetRelation(sid("a"), sid("b"), Relation::Conflict),
        &EditMode::Direct,
    )
    .unwrap();
    let step2 = run_structure_stage(
        &step1,
        &StructureEdit::SetRelation(sid("b"), sid("c"), Relation::Alliance),
        &EditMode::Direct,
    )
    .unwrap();
    match step2.stage_log.last().unwrap() {
        StageRecord::Structure {
            polynomial_after,
            applied,
            ..
        } => {
            assert!(*applied);
            assert!(polynomial_after.is_none());
        }
        other => panic!("unexpected record {other:?}"),
    }
    let err = run_influence_stage(&step2, &draft(&u, table1())).unwrap_err();
    assert_eq!(err.code(), "NotDecomposable");
}

#[test]
fn exclusion_vote_carried_when_c_pushes_for_it() {
    let state = example1_start();
    let next = run_structure_stage(
        &state,
        &StructureEdit::RemoveSubject(sid("d")),
        &example2_vote("1", VoteRule::Unanimity),
    )
    .unwrap();
    let StageRecord::Structure {
        vote,
        applied,
        polynomial_after,
        ..
    } = next.stage_log.last().unwrap()
    else {
        panic!("expected a structure record");
    };
    let vote = vote.as_ref().unwrap();
    assert!(*applied && vote.approved);
    for s in ["a", "b", "c", "d"] {
        assert!(vote.decisions[&sid(s)].as_ref().unwrap().is_one(), "{s}");
    }
    assert_eq!(polynomial_after.as_ref().unwrap().to_string(), "ab + c");
    assert!(!next.graph.contains(&sid("d")));
}

#[test]
fn exclusion_vote_fails_when_c_pushes_against_it() {
    let state = example1_start();
    let next = run_structure_stage(
        &state,
        &StructureEdit::RemoveSubject(sid("d")),
        &example2_vote("0", VoteRule::Unanimity),
    )
    .unwrap();
    let StageRecord::Structure {
        vote,
        applied,
        polynomial_after,
        ..
    } = next.stage_log.last().unwrap()
    else {
        panic!("expected a structure record");
    };
    let vote = vote.as_ref().unwrap();
    assert!(!*applied && !vote.approved);
    let interval = &vote.session().branches[0].intervals[&sid("a")];
    assert!(interval.inf.is_zero());
    for s in ["a", "b", "d"] {
        assert!(vote.decisions[&sid(s)].is_none(), "{s}");
    }
    assert_eq!(polynomial_after.as_ref().unwrap().to_string(), "abd + c");
    assert_eq!(next.graph, state.graph);
}

#[test]
fn decider_rule_follows_one_subject() {
    let state = example1_start();
    let next = run_structure_stage(
        &state,
        &StructureEdit::RemoveSubject(sid("d")),
        &example2_vote("1", VoteRule::DeciderIs(sid("a"))),
    )
    .unwrap();
    assert!(!next.graph.contains(&sid("d")));
    let err = run_structure_stage(
        &state,
        &StructureEdit::RemoveSubject(sid("d")),
        &example2_vote("1", VoteRule::DeciderIs(sid("z"))),
    )
    .unwrap_err();
    assert_eq!(err.code(), "UnknownSubject");
}

#[test]
fn direct_removal_matches_the_vote_outcome() {
    let state = example1_start();
    let direct = run_structure_stage(
        &state,
        &StructureEdit::RemoveSubject(sid("d")),
        &EditMode::Direct,
    )
    .unwrap();
    let voted = run_structure_stage(
        &state,
        &StructureEdit::RemoveSubject(sid("d")),
        &example2_vote("1", VoteRule::Unanimity),
    )
    .unwrap();
    assert_eq!(direct.graph, voted.graph);
    let StageRecord::Structure { vote, .. } = direct.stage_log.last().unwrap() else {
        panic!("expected a structure record");
    };
    assert!(vote.is_none());
}

#[test]
fn points_of_view_survive_structure_edits() {
    let state = example1_start();
    let u = state.universe.clone();
    let formed = run_influence_stage(&state, &draft(&u, table1())).unwrap();
    let edited = run_structure_stage(
        &formed,
        &StructureEdit::RemoveSubject(sid("d")),
        &EditMode::Direct,
    )
    .unwrap();
    for s in ["a", "b", "c"] {
        assert_eq!(
            edited.points_of_view[&sid(s)],
            formed.points_of_view[&sid(s)]
        );
    }
    assert!(!edited.points_of_view.contains_key(&sid("d")));
}

#[test]
fn final_stage_after_exclusion() {
    let state = state_with(
        &["a", "b", "c"],
        json!([
            ["a", "b", "alliance"],
            ["a", "c", "conflict"],
            ["b", "c", "conflict"]
        ]),
        json!({"a": "{β}", "b": "{β}", "c": {"inf": "0", "sup": "1"}}),
    );
    let u = state.universe.clone();
    let report = run_final_stage(&state, 4).unwrap();
    let intervals = report.final_intervals.unwrap();
    for s in ["a", "b"] {
        assert_eq!(intervals[&sid(s)].inf, expr(&u, "c"));
        assert_eq!(intervals[&sid(s)].sup, expr(&u, "{β} + c"));
    }
    assert_eq!(intervals[&sid("c")].inf, expr(&u, "{β}"));
    assert_eq!(intervals[&sid("c")].sup, expr(&u, "1"));
}

#[test]
fn final_stage_for_a_pure_alliance() {
    let state = state_with(
        &["a", "b"],
        json!([["a", "b", "alliance"]]),
        json!({"a": "{β}", "b": "{β}"}),
    );
    let u = state.universe.clone();
    let report = run_final_stage(&state, 4).unwrap();
    let a = &report.final_intervals.unwrap()[&sid("a")];
    assert_eq!(a.inf, expr(&u, "0"));
    assert_eq!(a.sup, expr(&u, "{β}"));
    assert_eq!(a.kind, IntervalKind::Range);
}

#[test]
fn final_stage_for_a_single_subject_is_free() {
    let state = state_with(&["c"], json!([]), json!({"c": "{β}"}));
    let report = run_final_stage(&state, 4).unwrap();
    assert_eq!(
        report.final_intervals.unwrap()[&sid("c")].kind,
        IntervalKind::Free
    );
}

#[test]
fn final_stage_needs_every_point_of_view() {
    let state = state_with(
        &["a", "b"],
        json!([["a", "b", "alliance"]]),
        json!({"a": "{β}"}),
    );
    assert_eq!(
        run_final_stage(&state, 4).unwrap_err().code(),
        "MatrixIncomplete"
    );
}

#[test]
fn committing_beta_for_c_forces_beta_everywhere() {
    let sc = load("example1_two_stage.json");
    let u = sc.universe().clone();
    let mut run = ScenarioRun::new(sc);
    run.step(None).unwrap();
    run.step(Some(&BTreeMap::from([(sid("c"), alt(&u, "{β}"))])))
        .unwrap();
    let report = run.report();
    let session = report.final_session().unwrap();
    for branch in &session.branches {
        for s in ["a", "b", "c", "d"] {
            assert_eq!(
                branch.intervals[&sid(s)].point(),
                Some(alt(&u, "{β}")),
                "{s}"
            );
        }
    }
}

#[test]
fn choices_must_lie_inside_the_point_of_view() {
    let free = state_with(&["c"], json!([]), json!({"c": {"inf": "0", "sup": "1"}}));
    let u = free.universe.clone();
    let gamma = BTreeMap::from([(sid("c"), alt(&u, "{γ}"))]);
    let next = apply_choices(&free, &gamma).unwrap();
    assert_eq!(
        next.points_of_view[&sid("c")],
        InfluenceValue::Concrete(alt(&u, "{γ}"))
    );
    assert_eq!(next.committed[&sid("c")], alt(&u, "{γ}"));

    let bounded = state_with(&["c"], json!([]), json!({"c": {"inf": "{β}", "sup": "1"}}));
    let err = apply_choices(&bounded, &gamma).unwrap_err();
    assert_eq!(err.code(), "ChoiceOutsideInterval");
    let unknown = BTreeMap::from([(sid("q"), alt(&u, "{γ}"))]);
    assert_eq!(
        apply_choices(&free, &unknown).unwrap_err().code(),
        "UnknownSubject"
    );
}

#[test]
fn failed_step_leaves_the_run_untouched() {
    let sc = load("example1_two_stage.json");
    let u = sc.universe().clone();
    let mut run = ScenarioRun::new(sc);
    run.step(None).unwrap();
    let before = run.state().clone();
    let bad = BTreeMap::from([(sid("a"), alt(&u, "{γ}"))]);
    assert_eq!(
        run.step(Some(&bad)).unwrap_err().code(),
        "ChoiceOutsideInterval"
    );
    assert_eq!(run.state(), &before);
    assert_eq!(run.cursor(), 1);
    run.step(None).unwrap();
    assert!(run.is_finished());
    assert_eq!(run.step(None).unwrap_err().code(), "StageOrderViolation");
}

fn stages_only(stages: serde_json::Value, blocks: serde_json::Value) -> rgt_core::Result<Scenario> {
    scenario(json!({
        "format_version": "1",
        "universe": ["α", "β", "γ"],
        "subjects": ["a", "b", "c", "d"],
        "relations": example_relations(),
        "stages": stages,
        "parallel_blocks": blocks,
    }))
}

#[test]
fn stage_order_is_validated() {
    let influence = json!({"type": "influence", "matrix": table1()});
    let remove = json!({"type": "structure", "edit": {"remove_subject": "d"}});
    let fin = json!({"type": "final"});
    let cases = [
        (json!([influence]), json!([])),
        (json!([fin, influence]), json!([])),
        (json!([influence, fin, fin]), json!([])),
        (json!([influence, remove, fin]), json!([[1, 2]])),
        (json!([influence, remove, fin]), json!([[0, 1], [1]])),
        (json!([influence, influence, fin]), json!([[0, 1]])),
        (json!([influence, remove, fin]), json!([[1, 0]])),
        (json!([influence, remove, fin]), json!([[0, 7]])),
        (json!([influence, remove, fin]), json!([[]])),
    ];
    for (stages, blocks) in cases {
        let err = stages_only(stages.clone(), blocks.clone()).unwrap_err();
        assert_eq!(err.code(), "StageOrderViolation", "{stages} {blocks}");
    }
    assert!(stages_only(json!([influence, remove, fin]), json!([[0, 1]])).is_ok());
}

#[test]
fn parallel_block_reads_the_same_prior_state() {
    let influence = json!({"type": "influence", "matrix": table1()});
    let remove = json!({"type": "structure", "edit": {"remove_subject": "d"}});
    let sc = stages_only(
        json!([influence, remove, {"type": "final"}]),
        json!([[0, 1]]),
    )
    .unwrap();
    assert_eq!(sc.steps().len(), 2);
    let report = run_scenario(&sc).unwrap();
    let u = sc.universe().clone();
    // The influence stage ran on the four-subject group.
    let StageRecord::Influence { session, .. } = &report.stages[0] else {
        panic!("expected the influence record first");
    };
    assert_eq!(session.polynomial.to_string(), "abd + c");
    let intervals = report.final_intervals.unwrap();
    assert_eq!(intervals.len(), 3);
    assert_eq!(intervals[&sid("c")].inf, expr(&u, "{β}"));
    assert_eq!(intervals[&sid("a")].sup, expr(&u, "{β} + c"));
}

#[test]
fn rejected_start_vote_skips_the_final_session() {
    let vote = json!({
        "universe": ["start"],
        "matrix": rows(&[("a", json!("symbolic")), ("b", json!("symbolic")), ("c", json!("0")), ("d", json!("symbolic"))]),
    });
    let sc = stages_only(
        json!([
            {"type": "influence", "matrix": table1()},
            {"type": "structure", "edit": "start_final_session", "mode": {"vote": vote}},
            {"type": "final"}
        ]),
        json!([]),
    )
    .unwrap();
    let report = run_scenario(&sc).unwrap();
    assert!(matches!(
        report.stages.last().unwrap(),
        StageRecord::FinalSkipped { .. }
    ));
    assert!(report.final_intervals.is_none());
    assert!(report.final_session().is_none());
}

#[test]
fn example3_runs_three_steps() {
    let sc = load("example3_multistage.json");
    let u = sc.universe().clone();
    let report = run_scenario(&sc).unwrap();
    assert_eq!(report.stages.len(), 3);
    assert_eq!(report.narrative.len(), 3);
    let session = report.final_session().unwrap();
    assert_eq!(session.polynomial.to_string(), "ab + c");
    let eqs: Vec<String> = session.equations.iter().map(ToString::to_string).collect();
    assert_eq!(
        eqs,
        [
            "a = (b + c)·a + c·¬a",
            "b = (a + c)·b + c·¬b",
            "c = c + a·b·¬c"
        ]
    );
    let intervals = report.final_intervals.unwrap();
    assert_eq!(intervals[&sid("c")].sup, expr(&u, "1"));
    assert_eq!(intervals[&sid("c")].inf, expr(&u, "{β}"));
}

/// After the influence stage, d's final interval with c = 0 admits only 0
/// and {β}; alone, the preliminary session let d reach {α, β}.
#[test]
fn two_stage_process_narrows_d() {
    let report = run_scenario(&load("example1_two_stage.json")).unwrap();
    let u = report.final_session().unwrap().branches[0].intervals[&sid("d")]
        .inf
        .universe()
        .clone();
    let c_zero = BTreeMap::from([(sid("c"), u.zero())]);
    let allowed =
        |inf: &SymbolicExpr, sup: &SymbolicExpr, env: &BTreeMap<SubjectId, Alternative>| {
            let (lo, hi) = (inf.eval(env).unwrap(), sup.eval(env).unwrap());
            rgt_core::enumerate_between(&lo, &hi).unwrap()
        };
    let final_session = report.final_session().unwrap();
    for branch in &final_session.branches {
        let d = &branch.intervals[&sid("d")];
        assert_eq!(
            allowed(&d.inf, &d.sup, &c_zero),
            vec![u.zero(), alt(&u, "{β}")]
        );
    }
    let StageRecord::Influence { session, .. } = &report.stages[0] else {
        panic!("expected the influence record first");
    };
    let d = &session.branches[0].intervals[&sid("d")];
    assert!(allowed(&d.inf, &d.sup, &BTreeMap::new()).contains(&alt(&u, "{α, β}")));
}

#[test]
fn reports_are_deterministic() {
    for name in ["example1_two_stage.json", "example3_multistage.json"] {
        let a = serde_json::to_string(&run_scenario(&load(name)).unwrap()).unwrap();
        let b = serde_json::to_string(&run_scenario(&load(name)).unwrap()).unwrap();
        assert_eq!(a, b);
        let text_a = run_scenario(&load(name)).unwrap().render_text(true);
        assert_eq!(text_a, run_scenario(&load(name)).unwrap().render_text(true));
    }
}

#[test]
fn scenario_files_are_strict() {
    let mut bad =
        serde_json::from_str::<serde_json::Value>(&fixture("example1_two_stage.json")).unwrap();
    bad["format_version"] = json!("2");
    assert_eq!(scenario(bad.clone()).unwrap_err().code(), "SchemaError");
    bad["format_version"] = json!("1");
    bad["extra"] = json!(true);
    assert_eq!(scenario(bad).unwrap_err().code(), "SchemaError");
}
