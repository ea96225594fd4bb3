use std::time::Duration;

use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::time::timeout;

use woz::bridge::{run_bridge, Backoff, BridgeError, MappingTable};

const TABLE: &str = r#"[
    {"kind": "instruction", "topic": "/dm/instruction", "body_field": "text"},
    {"kind": "status", "topic": "/robot/status", "body_field": "text"}
]"#;

fn fast() -> Backoff {
    Backoff { initial: Duration::from_millis(10), max: Duration::from_millis(40) }
}

async fn accept(listener: &TcpListener) -> BufReader<TcpStream> {
    let (s, _) =
        timeout(Duration::from_secs(5), listener.accept()).await.expect("bridge never connected").unwrap();
    BufReader::new(s)
}

async fn read_line(side: &mut BufReader<TcpStream>) -> String {
    let mut line = String::new();
    timeout(Duration::from_secs(5), side.read_line(&mut line)).await.expect("no line").unwrap();
    line
}

#[tokio::test]
async fn forwards_both_ways_and_reconnects_after_a_drop() {
    let wizard = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let robot = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let table = MappingTable::from_json(TABLE).unwrap();
    let mut handle = run_bridge(table, wizard.local_addr().unwrap(), robot.local_addr().unwrap(), fast());

    let mut wiz = accept(&wizard).await;
    let mut bot = accept(&robot).await;
    wiz.get_mut().write_all(b"MSG woz instruction go%20left\nMSG woz unknown x\n").await.unwrap();
    assert_eq!(read_line(&mut bot).await, "PUB /dm/instruction text=go%20left\n");
    bot.get_mut().write_all(b"PUB /robot/status text=arrived\n").await.unwrap();
    assert_eq!(read_line(&mut wiz).await, "MSG woz status arrived\n");

    drop(bot);
    let err = timeout(Duration::from_secs(5), handle.next_error()).await.unwrap().unwrap();
    assert!(matches!(err, BridgeError::ConnectionLost { .. }), "{err:?}");
    assert_eq!(handle.stats().connection_losses(), 1);

    let mut wiz = accept(&wizard).await;
    let mut bot = accept(&robot).await;
    bot.get_mut().write_all(b"PUB /robot/status text=back\n").await.unwrap();
    assert_eq!(read_line(&mut wiz).await, "MSG woz status back\n");

    let stats = handle.stats().clone();
    assert_eq!(stats.to_robot.received(), 2);
    assert_eq!(stats.to_robot.forwarded(), 1);
    assert_eq!(stats.to_robot.dropped(), 1);
    assert_eq!(stats.to_wizard.forwarded(), 2);
    handle.stop();
}

#[tokio::test]
async fn keeps_retrying_until_an_endpoint_appears() {
    let wizard = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let parked = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let robot_addr = parked.local_addr().unwrap();
    drop(parked);

    let table = MappingTable::from_json(TABLE).unwrap();
    let mut handle = run_bridge(table, wizard.local_addr().unwrap(), robot_addr, fast());
    for _ in 0..3 {
        let err = timeout(Duration::from_secs(5), handle.next_error()).await.unwrap().unwrap();
        match err {
            BridgeError::ConnectionLost { endpoint, .. } => assert_eq!(endpoint, robot_addr.to_string()),
            other => panic!("{other:?}"),
        }
        // The wizard side connected before the robot side failed; discard it.
        drop(accept(&wizard).await);
    }
    assert!(handle.stats().connection_losses() >= 3);

    let robot = TcpListener::bind(robot_addr).await.unwrap();
    let (mut wiz, mut bot) = loop {
        let wiz = accept(&wizard).await;
        if let Ok(Ok((bot, _))) = timeout(Duration::from_millis(500), robot.accept()).await {
            break (wiz, BufReader::new(bot));
        }
    };
    bot.get_mut().write_all(b"PUB /robot/status text=hello\n").await.unwrap();
    assert_eq!(read_line(&mut wiz).await, "MSG woz status hello\n");
    handle.stop();
}

#[test]
fn backoff_doubles_to_its_cap() {
    let delays: Vec<u64> = Backoff::default().delays().take(7).map(|d| d.as_millis() as u64).collect();
    assert_eq!(delays, vec![500, 1000, 2000, 4000, 8000, 8000, 8000]);
}
