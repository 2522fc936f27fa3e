//! Episode protocol: transcripts, replay, isolation and truth hiding.

use std::io::Cursor;
use std::sync::Arc;

use serde_json::Value;

use rvbench_core::episode::{serve_lines, replay_transcript, Engine, MockClock, ServerMessage, SystemClock};
use rvbench_core::evaluator::truth_submission;
use rvbench_core::orbit::PlanetElements;
use rvbench_core::solver::greedy_solve;
use rvbench_core::task::{generate_task, TaskBundle, Tier};

fn task(seed: u64, id: &str, tier: Tier) -> TaskBundle {
    let mut b = generate_task(seed).unwrap();
    b.task_id = id.into();
    b.tier = tier;
    b
}

fn transcript(b: &TaskBundle) -> Vec<String> {
    let guess = greedy_solve(&b.dataset).submission;
    let mut bad = guess.clone();
    bad.planets.push(PlanetElements::new(0.1, 0.5, 0.1, 1.0, 2.0, 0.0));
    let (guess, bad) = (serde_json::to_string(&guess).unwrap(), serde_json::to_string(&bad).unwrap());
    vec![
        format!(r#"{{"type":"hello","seq":0,"task_id":"{}","episode_id":"ep1","client":"test"}}"#, b.task_id),
        r#"{"type":"usage","episode_id":"ep1","seq":1,"tokens":1200,"tool_calls":2}"#.into(),
        format!(r#"{{"type":"submit","episode_id":"ep1","seq":2,"submission":{bad}}}"#),
        format!(r#"{{"type":"submit","episode_id":"ep1","seq":3,"submission":{guess}}}"#),
        r#"{"type":"usage","episode_id":"ep1","seq":4,"tokens":5000}"#.into(),
        r#"{"type":"finalize","episode_id":"ep1","seq":5,"reason":"agent_done"}"#.into(),
    ]
}

#[test]
fn replay_is_deterministic() {
    let b = task(11, "a", Tier::Medium);
    let lines = transcript(&b);
    let run = || {
        let engine = Engine::new(vec![b.clone()], Arc::new(SystemClock::default())).with_replay(true);
        replay_transcript(&engine, lines.iter().map(String::as_str))
    };
    let first = run();
    assert_eq!(first, run());
    let kinds: Vec<String> = first
        .iter()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["type"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(kinds, ["task", "usage_ack", "report", "report", "usage_ack", "result"]);
    for (i, l) in first.iter().enumerate() {
        let v: Value = serde_json::from_str(l).unwrap();
        assert_eq!(v["episode_id"], "ep1");
        assert_eq!(v["seq"], i as u64);
        // every outbound message parses back into the protocol type
        let _: ServerMessage = serde_json::from_str(l).unwrap();
    }
}

#[test]
fn attempts_are_consumed_by_rejections_and_grades() {
    let b = task(11, "a", Tier::Medium);
    let engine = Engine::new(vec![b.clone()], Arc::new(SystemClock::default())).with_replay(true);
    let out = replay_transcript(&engine, transcript(&b).iter().map(String::as_str));
    let rejected: Value = serde_json::from_str(&out[2]).unwrap();
    assert_eq!(rejected["outcome"]["status"], "rejected");
    assert_eq!(rejected["budget"]["attempts_remaining"], 4);
    let graded: Value = serde_json::from_str(&out[3]).unwrap();
    assert_eq!(graded["outcome"]["status"], "graded");
    assert_eq!(graded["budget"]["attempts_remaining"], 3);
    let result: Value = serde_json::from_str(&out[5]).unwrap();
    assert_eq!(result["result"]["best_index"], 1);
    assert_eq!(result["result"]["tool_calls"], 2);
}

fn numbers(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) => out.push(n.as_f64().unwrap()),
        Value::Array(a) => a.iter().for_each(|x| numbers(x, out)),
        Value::Object(o) => o.values().for_each(|x| numbers(x, out)),
        _ => {}
    }
}

fn keys(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Array(a) => a.iter().for_each(|x| keys(x, out)),
        Value::Object(o) => o.iter().for_each(|(k, x)| {
            out.push(k.clone());
            keys(x, out)
        }),
        _ => {}
    }
}

#[test]
fn truth_never_leaves_the_engine() {
    for seed in [3, 8, 21] {
        let b = task(seed, "leak", Tier::Hard);
        let engine = Engine::new(vec![b.clone()], Arc::new(SystemClock::default())).with_replay(true);
        let out = replay_transcript(&engine, transcript(&b).iter().map(String::as_str));

        let mut secret: Vec<f64> = Vec::new();
        for p in b.truth_elements() {
            secret.extend([p.period_days, p.m_sin_i_mjup, p.ecc, p.omega_rad, p.mean_longitude_rad, p.node_rad]);
        }
        for s in b.truth_signals().unwrap() {
            secret.extend([s.k_ms, s.mean_anomaly_at_ref]);
        }
        secret.extend(b.truth_offsets.values());
        secret.push(b.noise.sigma_w_ms);
        if let Some(gp) = b.noise.gp {
            secret.extend([gp.sigma_gp_ms, gp.p_rot_days]);
        }
        secret.retain(|x| *x != 0.0);

        for line in &out {
            let v: Value = serde_json::from_str(line).unwrap();
            let mut ks = Vec::new();
            keys(&v, &mut ks);
            for banned in ["truth_planets", "truth_offsets", "noise", "seed", "difficulty", "sigma_w_ms", "gp"] {
                assert!(!ks.iter().any(|k| k == banned), "seed {seed}: key {banned} in {line}");
            }
            let mut nums = Vec::new();
            numbers(&v, &mut nums);
            for x in nums {
                assert!(!secret.contains(&x), "seed {seed}: truth value {x} in outbound message");
            }
        }
    }
}

#[test]
fn serve_over_a_byte_stream() {
    let b = task(5, "s", Tier::Easy);
    let engine = Engine::new(vec![b.clone()], MockClock::new());
    let sub = serde_json::to_string(&truth_submission(&b).unwrap()).unwrap();
    let input = format!(
        "{}\n\n{}\nnot json\n{}\n",
        r#"{"type":"hello","seq":0,"episode_id":"x"}"#,
        format_args!(r#"{{"type":"submit","episode_id":"x","seq":1,"submission":{sub}}}"#),
        r#"{"type":"finalize","episode_id":"x","seq":2,"reason":"agent_done"}"#
    );
    let mut output = Vec::new();
    serve_lines(&engine, Cursor::new(input), &mut output).unwrap();
    let lines: Vec<Value> = String::from_utf8(output)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1]["outcome"]["report"]["passed"], true);
    assert_eq!(lines[2]["type"], "error");
    assert_eq!(lines[3]["result"]["passed"], true);
    assert_eq!(lines[3]["result"]["status"], "env_done");
}

#[test]
fn protocol_errors() {
    let engine = Engine::new(vec![task(5, "a", Tier::Easy), task(6, "b", Tier::Easy)], MockClock::new());
    let code = |line: &str| {
        let v: Value = serde_json::from_str(&engine.handle_line(line)).unwrap();
        v["code"].as_str().map(str::to_string)
    };
    assert_eq!(code(r#"{"type":"hello","seq":0}"#).as_deref(), Some("protocol"));
    assert_eq!(code(r#"{"type":"hello","seq":3,"task_id":"a"}"#).as_deref(), Some("protocol"));
    assert_eq!(code(r#"{"type":"hello","seq":0,"task_id":"zz"}"#).as_deref(), Some("task_not_found"));
    assert_eq!(code(r#"{"type":"hello","seq":0,"task_id":"a","episode_id":"e"}"#), None);
    assert_eq!(code(r#"{"type":"hello","seq":0,"task_id":"b","episode_id":"e"}"#).as_deref(), Some("conflict"));
    assert_eq!(code(r#"{"type":"usage","episode_id":"nope","seq":1,"tokens":1}"#).as_deref(), Some("not_found"));
    assert_eq!(code(r#"{"type":"usage","episode_id":"e","seq":1,"tokens":10}"#), None);
    assert_eq!(code(r#"{"type":"usage","episode_id":"e","seq":2,"tokens":9}"#).as_deref(), Some("invalid_usage"));
    assert_eq!(code(r#"{"type":"launch","episode_id":"e","seq":3}"#).as_deref(), Some("protocol"));
    assert_eq!(code(r#"{"type":"finalize","episode_id":"e","seq":3,"reason":"agent_done"}"#), None);
}

#[test]
fn concurrent_episodes_are_isolated() {
    let b = task(9, "c", Tier::Hard);
    let engine = Arc::new(Engine::new(vec![b.clone()], Arc::new(SystemClock::default())));
    let handles: Vec<_> = (0..4)
        .map(|i| {
            let engine = engine.clone();
            let b = b.clone();
            std::thread::spawn(move || {
                let (id, _, _) = engine.start_episode("c", Some(format!("ep{i}"))).unwrap();
                for _ in 0..=i {
                    engine.handle_submit(&id, truth_submission(&b).unwrap()).unwrap();
                }
                engine.report_usage(&id, 100 * (i as u64 + 1), None).unwrap();
                engine.state(&id).unwrap()
            })
        })
        .collect();
    for (i, h) in handles.into_iter().enumerate() {
        let st = h.join().unwrap();
        assert_eq!(st.submissions.len(), i + 1);
        assert_eq!(st.tokens_used, 100 * (i as u64 + 1));
    }
}
