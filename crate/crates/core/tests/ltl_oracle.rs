use std::collections::BTreeSet;

use crowdspec::arbitrary::{arb_labels, arb_ltl, trace_from_labels};
use crowdspec::checker::eval;
use crowdspec::logic::{BdiFormula, CrowdFormula, Modality, PropFormula};
use proptest::prelude::*;

type Labels = [BTreeSet<String>];

fn atom_name(f: &CrowdFormula) -> &str {
    match f {
        CrowdFormula::Msg { .. } => "m",
        CrowdFormula::Bdi(BdiFormula::Modal(Modality::Belief, PropFormula::Atom(a))) => a,
        other => panic!("unexpected atom {other}"),
    }
}

fn bdi(b: &BdiFormula, l: &BTreeSet<String>) -> bool {
    match b {
        BdiFormula::Not(a) => !bdi(a, l),
        BdiFormula::And(a, c) => bdi(a, l) && bdi(c, l),
        BdiFormula::Prop(_) => panic!("bare propositions are not generated"),
        m => l.contains(atom_name(&CrowdFormula::Bdi(m.clone()))),
    }
}

/// Truth at every position of the word `l0 .. ln ln ln ...`, computed
/// backwards with the expansion laws. Beyond the last state the word is
/// constant, so the least fixpoint there is the operand itself.
fn table(f: &CrowdFormula, w: &Labels) -> Vec<bool> {
    let n = w.len();
    match f {
        CrowdFormula::True => vec![true; n],
        CrowdFormula::Bdi(b) => w.iter().map(|l| bdi(b, l)).collect(),
        CrowdFormula::Msg { .. } => w.iter().map(|l| l.contains("m")).collect(),
        CrowdFormula::Not(a) => table(a, w).into_iter().map(|x| !x).collect(),
        CrowdFormula::And(a, b) => table(a, w).into_iter().zip(table(b, w)).map(|(x, y)| x && y).collect(),
        CrowdFormula::Next(a) => {
            let t = table(a, w);
            (0..n).map(|i| t[(i + 1).min(n - 1)]).collect()
        }
        CrowdFormula::Eventually(a) => {
            let t = table(a, w);
            let mut out = vec![false; n];
            out[n - 1] = t[n - 1];
            for i in (0..n - 1).rev() {
                out[i] = t[i] || out[i + 1];
            }
            out
        }
        CrowdFormula::Until(a, b) => {
            let (ta, tb) = (table(a, w), table(b, w));
            let mut out = vec![false; n];
            out[n - 1] = tb[n - 1];
            for i in (0..n - 1).rev() {
                out[i] = tb[i] || (ta[i] && out[i + 1]);
            }
            out
        }
        other => panic!("not generated: {other}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn checker_agrees_with_backward_oracle(f in arb_ltl(4), labels in arb_labels(6)) {
        let trace = trace_from_labels(&labels);
        let want = table(&f, &labels);
        for (t, w) in want.iter().enumerate() {
            prop_assert_eq!(eval(&trace, &f, t, &"s".into()).unwrap(), *w, "{} at {} over {:?}", f, t, labels);
        }
    }
}
