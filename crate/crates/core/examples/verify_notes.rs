//! Checks the bundled notes against the superstore data and prints the
//! corrected text for each one flagged.

use std::collections::BTreeSet;

use proactive_agent::backend::ScriptedBackend;
use proactive_agent::client::apply_correction;
use proactive_agent::fixtures;
use proactive_agent::model::Note;
use proactive_agent::verifier::review_note;

#[derive(serde::Deserialize)]
struct Case {
    note: Note,
}

fn main() {
    let dir = fixtures::default_dir().join("notes");
    let cases: Vec<Case> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("verification.json")).unwrap()).unwrap();
    let backend = ScriptedBackend::load(&dir.join("script.json")).unwrap();
    let (model, knowledge) = (fixtures::superstore_model(), fixtures::superstore_knowledge());

    for case in &cases {
        let Some(out) = review_note(&case.note, &[], &knowledge, &model, &backend, &mut BTreeSet::new()) else {
            println!("{}: no review", case.note.note_id);
            continue;
        };
        match out.review.issues.first() {
            None => println!("{}  ok     {}", case.note.note_id, case.note.text),
            Some(issue) => {
                println!("{}  wrong  {}", case.note.note_id, case.note.text);
                println!("       fix    {}", apply_correction(&case.note.text, issue));
            }
        }
    }
}
