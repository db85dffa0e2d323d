//! Deliver alerts to a webhook. A throwaway local listener stands in for the
//! receiving service and prints each JSON body it gets.
//!
//! ```text
//! cargo run --example webhook_alerts
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use joulewatch::alert::WebhookSink;
use joulewatch::{default_profile, DeviceStatus, Pipeline, PipelineConfig, Protocol, Regime, ScenarioConfig, Store};

fn serve(listener: TcpListener, expected: usize) {
    for stream in listener.incoming().take(expected) {
        let mut stream = stream.expect("connection");
        let mut reader = BufReader::new(stream.try_clone().expect("clone"));
        let mut length = 0;
        let mut line = String::new();
        while reader.read_line(&mut line).expect("header") > 2 {
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().expect("length");
            }
            line.clear();
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).expect("body");
        println!("webhook got: {}", String::from_utf8_lossy(&body));
        stream
            .write_all(b"HTTP/1.1 204 No Content\r\nConnection: close\r\n\r\n")
            .expect("reply");
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let url = format!("http://{}/alerts", listener.local_addr()?);
    // One registration and one confirmation, for the MQTT scope and the aggregate.
    let server = thread::spawn(move || serve(listener, 4));

    let scenario = ScenarioConfig::single(Protocol::MqttSub, Regime::Attack, 3).generate()?;
    let mut store = Store::in_memory();
    let mut pipeline = Pipeline::new(PipelineConfig::default(), default_profile("*", DeviceStatus::Active), &mut store)?;
    pipeline.add_sink(Box::new(WebhookSink::new(url)));
    pipeline.set_energy("rpi-0", scenario.energy);
    pipeline.run(scenario.events.into_iter().map(Ok))?;
    let summary = pipeline.finish(None)?;
    server.join().expect("server thread");
    println!("delivery failures: {}", summary.delivery_failures);
    Ok(())
}
