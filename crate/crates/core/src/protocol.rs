//! Protocol labels, TCP packet kinds and detection scopes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Protocol class of one observed packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Protocol {
    Tcp,
    Udp,
    MqttSub,
    MqttPub,
    Other,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::Tcp,
        Protocol::Udp,
        Protocol::MqttSub,
        Protocol::MqttPub,
        Protocol::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tcp => "TCP",
            Protocol::Udp => "UDP",
            Protocol::MqttSub => "MQTT_SUB",
            Protocol::MqttPub => "MQTT_PUB",
            Protocol::Other => "OTHER",
        }
    }

    /// The per-protocol detection scope this protocol feeds, if any.
    pub fn scope(self) -> Option<Scope> {
        match self {
            Protocol::Tcp => Some(Scope::Tcp),
            Protocol::Udp => Some(Scope::Udp),
            Protocol::MqttSub => Some(Scope::Mqtt),
            Protocol::MqttPub | Protocol::Other => None,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "TCP" => Ok(Protocol::Tcp),
            "UDP" => Ok(Protocol::Udp),
            "MQTT_SUB" => Ok(Protocol::MqttSub),
            "MQTT_PUB" => Ok(Protocol::MqttPub),
            "OTHER" => Ok(Protocol::Other),
            other => Err(Error::Config(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Sub-type of a TCP packet. Non-TCP packets are always `Received`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PacketKind {
    Received,
    Retransmission,
    Acknowledged,
}

impl PacketKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Received => "RECEIVED",
            PacketKind::Retransmission => "RETRANSMISSION",
            PacketKind::Acknowledged => "ACKNOWLEDGED",
        }
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PacketKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "RECEIVED" => Ok(PacketKind::Received),
            "RETRANSMISSION" => Ok(PacketKind::Retransmission),
            "ACKNOWLEDGED" => Ok(PacketKind::Acknowledged),
            other => Err(Error::Config(format!("unknown packet kind `{other}`"))),
        }
    }
}

/// What a detector watches: one protocol's counted packets, or all of them summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scope {
    Tcp,
    Udp,
    Mqtt,
    Aggregate,
}

impl Scope {
    pub const ALL: [Scope; 4] = [Scope::Tcp, Scope::Udp, Scope::Mqtt, Scope::Aggregate];
    pub const PROTOCOLS: [Scope; 3] = [Scope::Tcp, Scope::Udp, Scope::Mqtt];

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Tcp => "TCP",
            Scope::Udp => "UDP",
            Scope::Mqtt => "MQTT",
            Scope::Aggregate => "AGGREGATE",
        }
    }

    /// Parses a comma-separated scope list such as `tcp,udp,mqtt,aggregate`.
    pub fn parse_list(list: &str) -> Result<Vec<Scope>, Error> {
        let mut scopes = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let scope: Scope = item.parse()?;
            if !scopes.contains(&scope) {
                scopes.push(scope);
            }
        }
        if scopes.is_empty() {
            return Err(Error::Config("empty scope list".into()));
        }
        Ok(scopes)
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tcp" => Ok(Scope::Tcp),
            "udp" => Ok(Scope::Udp),
            "mqtt" | "mqtt_sub" => Ok(Scope::Mqtt),
            "aggregate" | "all" => Ok(Scope::Aggregate),
            other => Err(Error::Config(format!("unknown scope `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scope_list_dedups_and_rejects_unknown() {
        assert_eq!(
            Scope::parse_list("tcp, udp,tcp,aggregate").unwrap(),
            vec![Scope::Tcp, Scope::Udp, Scope::Aggregate]
        );
        assert!(Scope::parse_list("tcp,icmp").is_err());
        assert!(Scope::parse_list("").is_err());
    }

    #[test]
    fn only_counted_protocols_map_to_scopes() {
        assert_eq!(Protocol::MqttSub.scope(), Some(Scope::Mqtt));
        assert_eq!(Protocol::MqttPub.scope(), None);
        assert_eq!(Protocol::Other.scope(), None);
    }
}
