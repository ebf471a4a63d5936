//! A scripted provider built in code: prompt rendering, parsing and repair.
//!
//! cargo run --example scripted_provider

use sceneforge::model_provider::{FixtureEntry, ParsedReply, Provider, ProviderRequest, RequestKind, ScriptedFixture};
use std::collections::BTreeMap;

fn main() {
    let provider = Provider::scripted(ScriptedFixture::new(vec![
        FixtureEntry::new(RequestKind::Orient, ["The front is shown in image three."]),
        FixtureEntry::new(RequestKind::Place, ["I would put it by the wall.", "```json\n{\"position\": [1, 2, 0], \"rotation\": [0, 0, 90]}\n```"]),
    ]));

    let ctx = BTreeMap::from([("name".to_string(), "oak chair".to_string())]);
    let prompt = provider.render_prompt("orient", &ctx).unwrap();
    println!("orient prompt starts: {:?}", &prompt[..60]);
    let views: Vec<_> = ["0", "90", "180", "270"].iter().map(|d| format!("views/{d}.png").into()).collect();
    let reply = provider.complete(&ProviderRequest::new(RequestKind::Orient, prompt, views).unwrap()).unwrap();
    if let ParsedReply::ViewIndex(i) = reply.parsed {
        println!("front view {i} -> offset {} degrees", (i - 1) * 90);
    }

    let reply = provider
        .complete(&ProviderRequest::new(RequestKind::Place, "place the chair".into(), vec![]).unwrap())
        .unwrap();
    println!("place reply parsed after {} attempts: {}", reply.attempts, reply.text.lines().nth(1).unwrap_or(""));
}
