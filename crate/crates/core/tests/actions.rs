//! Every recommendation is phase-legal, for every card kind under every
//! plan context.

mod common;

use std::collections::BTreeSet;

use daf_core::engine::run_plan;
use daf_core::registry::OutputKind;
use daf_core::report::{
    legal_actions, recommend_actions, Action, ActionThresholds, AuditPlanContext, CardOutput, Goal, Phase,
    TargetDeficit,
};

fn contexts() -> Vec<AuditPlanContext> {
    let mut out = Vec::new();
    for goal in Goal::ALL {
        for phase in Phase::ALL {
            for mutable in [false, true] {
                for release_planned in [false, true] {
                    out.push(AuditPlanContext {
                        goal,
                        phase,
                        mutable,
                        release_planned,
                    });
                }
            }
        }
    }
    out
}

#[test]
fn recommendations_are_phase_legal_everywhere() {
    let fx = common::kitchen_sink(120, 3);
    let run = run_plan(&fx.load()).unwrap();
    let kinds: BTreeSet<&str> = run.cards.iter().map(|c| c.output.kind().as_str()).collect();
    assert_eq!(kinds.len(), 8, "fixture should cover every output kind: {kinds:?}");

    let deficit = TargetDeficit {
        label: "old".into(),
        observed: 1,
        target_share: 0.5,
        additional_records: 10,
    };
    let mut checked = 0usize;
    let mut seen_actions: BTreeSet<(Phase, Action)> = BTreeSet::new();
    for base in &run.cards {
        for deficits in [false, true] {
            let mut card = base.clone();
            if deficits {
                card.target_deficits = vec![deficit.clone()];
            }
            for limit in [0.0, 0.05, 1.0] {
                let limits = ActionThresholds {
                    proportion_limit: limit,
                };
                for ctx in contexts() {
                    let recs = recommend_actions(&card, &ctx, &limits);
                    let mut pairs = BTreeSet::new();
                    for r in &recs {
                        assert!(
                            legal_actions(r.phase).contains(&r.action),
                            "{:?} not legal in {:?} ({})",
                            r.action,
                            r.phase,
                            card.analysis_id
                        );
                        assert!(!r.rationale.is_empty());
                        assert!(pairs.insert((r.phase, r.action)), "duplicate recommendation");
                        seen_actions.insert((r.phase, r.action));
                    }
                    assert!(pairs.contains(&(Phase::DataCollectionProcessing, Action::Flagging)));
                    if matches!(card.output, CardOutput::Unsupported { .. }) {
                        assert!(pairs.contains(&(Phase::Documentation, Action::Warning)));
                    }
                    if !ctx.mutable {
                        for a in [Action::Addition, Action::Removal, Action::Augmentation] {
                            assert!(!pairs.contains(&(Phase::DataCollectionProcessing, a)));
                        }
                    }
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, run.cards.len() * 2 * 3 * 64);
    // Every cell of the phase-action table is reachable.
    for phase in Phase::ALL {
        for a in legal_actions(phase) {
            assert!(
                seen_actions.contains(&(phase, *a)),
                "{a:?} in {phase:?} never recommended"
            );
        }
    }
}

#[test]
fn unsupported_cards_carry_the_effort_label() {
    let fx = common::kitchen_sink(20, 1);
    let run = run_plan(&fx.load()).unwrap();
    for id in ["hateful_symbols", "psi_x_hateful_symbols"] {
        let card = run.cards.iter().find(|c| c.analysis_id == id).unwrap();
        assert_eq!(card.output.kind(), OutputKind::Unsupported);
        match &card.output {
            CardOutput::Unsupported { reason } => assert!(reason.contains(card.effort_label.as_str()), "{reason}"),
            _ => unreachable!(),
        }
    }
}
