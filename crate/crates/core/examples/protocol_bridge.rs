//! Runs the bridge between two local line endpoints: a fake wizard broker
//! sends instructions, a fake robot answers with status messages.

use std::time::Duration;

use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpListener;
use woz::bridge::{run_bridge, Backoff, MappingTable, TopicMessage, WizardFrame};

const TABLE: &str = r#"[
  {"kind": "instruction", "topic": "/dm/instruction", "body_field": "text"},
  {"kind": "status", "topic": "/robot/status", "body_field": "text"}
]"#;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = MappingTable::from_json(TABLE)?;
    let wizard = TcpListener::bind("127.0.0.1:0").await?;
    let robot = TcpListener::bind("127.0.0.1:0").await?;
    let handle = run_bridge(table, wizard.local_addr()?, robot.local_addr()?, Backoff::default());

    let (wiz, _) = wizard.accept().await?;
    let (bot, _) = robot.accept().await?;
    let (wiz_r, mut wiz_w) = wiz.into_split();
    let (bot_r, mut bot_w) = bot.into_split();
    let mut wiz_lines = BufReader::new(wiz_r).lines();
    let mut bot_lines = BufReader::new(bot_r).lines();

    for frame in [
        WizardFrame::new("woz", "instruction", "move forward 3 feet"),
        WizardFrame::new("woz", "vrSpeech", "not mapped, dropped"),
        WizardFrame::new("woz", "instruction", "turn left 90 degrees"),
    ] {
        println!("wizard -> {}", frame.encode());
        wiz_w.write_all(format!("{}\n", frame.encode()).as_bytes()).await?;
    }
    for _ in 0..2 {
        let line = bot_lines.next_line().await?.unwrap();
        let msg = TopicMessage::decode(&line)?;
        println!("robot  <- {line}");
        let reply =
            TopicMessage::new("/robot/status", [("text", format!("complete: {}", msg.payload["text"]))]);
        bot_w.write_all(format!("{}\n", reply.encode()).as_bytes()).await?;
    }
    for _ in 0..2 {
        let line = wiz_lines.next_line().await?.unwrap();
        println!("wizard <- {line}  ({})", WizardFrame::decode(&line)?.body);
    }

    tokio::time::sleep(Duration::from_millis(50)).await;
    println!("{}", handle.stats());
    handle.stop();
    Ok(())
}
