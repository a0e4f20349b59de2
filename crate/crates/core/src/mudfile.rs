//! RFC 8520-shaped MUD profiles: parsing, canonical serialization, quality
//! variants, and offer metadata.
//!
//! The model covers the subset of RFC 8520 needed for the marketplace: a MUD
//! container with one access-list per policy direction, and ACEs that match
//! on either a DNS name, a controller class URI, or one of the local network
//! abstractions (`local-networks`, `same-manufacturer`, `my-controller`),
//! optionally constrained by IP protocol and an `eq` port. Every ACE action
//! is `accept` — MUD is an allowlist.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Which policy list an ACE belongs to. `FromDevice` is outbound traffic,
/// `ToDevice` is inbound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    FromDevice,
    ToDevice,
}

/// Whether an ACE describes local-network or remote communication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AceScope {
    Local,
    Remote,
}

/// The match target of an ACE.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MatchKind {
    /// DNS name of a remote endpoint.
    DomainName(String),
    /// Controller class URI.
    ControllerClass(String),
    LocalNetworks,
    SameManufacturer,
    MyController,
}

impl MatchKind {
    /// Local-abstraction matches are `Local`; DNS-name and controller-URI
    /// matches are `Remote`.
    pub fn scope(&self) -> AceScope {
        match self {
            MatchKind::LocalNetworks | MatchKind::SameManufacturer | MatchKind::MyController => {
                AceScope::Local
            }
            MatchKind::DomainName(_) | MatchKind::ControllerClass(_) => AceScope::Remote,
        }
    }
}

/// One allowlist rule. The action is always accept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ace {
    pub name: String,
    pub direction: Direction,
    pub match_kind: MatchKind,
    /// IP protocol number (6 = TCP, 17 = UDP) when constrained.
    pub protocol: Option<u8>,
    pub dst_port: Option<u16>,
    pub src_port: Option<u16>,
}

impl Ace {
    pub fn scope(&self) -> AceScope {
        self.match_kind.scope()
    }
}

/// A parsed MUD profile: metadata plus the ACEs of both policy directions.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MudProfile {
    pub mud_url: String,
    pub last_update: String,
    pub system_info: String,
    pub from_device_aces: Vec<Ace>,
    pub to_device_aces: Vec<Ace>,
}

impl MudProfile {
    pub fn ace_count(&self) -> u32 {
        (self.from_device_aces.len() + self.to_device_aces.len()) as u32
    }

    /// All ACEs, from-device first, in document order.
    pub fn aces(&self) -> impl Iterator<Item = &Ace> {
        self.from_device_aces
            .iter()
            .chain(self.to_device_aces.iter())
    }
}

/// The four data-quality variants a supplier can derive from a full profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum QualityTier {
    /// Complete list of the original ACEs.
    Hq,
    /// All local rules removed (both directions).
    Mqr,
    /// All inbound (to-device) rules removed.
    Mqo,
    /// One randomly selected rule removed.
    Lq,
}

impl QualityTier {
    pub const ALL: [QualityTier; 4] = [
        QualityTier::Hq,
        QualityTier::Mqr,
        QualityTier::Mqo,
        QualityTier::Lq,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QualityTier::Hq => "HQ",
            QualityTier::Mqr => "MQR",
            QualityTier::Mqo => "MQO",
            QualityTier::Lq => "LQ",
        }
    }
}

impl fmt::Display for QualityTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for QualityTier {
    type Err = MudError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "HQ" => Ok(QualityTier::Hq),
            "MQR" => Ok(QualityTier::Mqr),
            "MQO" => Ok(QualityTier::Mqo),
            "LQ" => Ok(QualityTier::Lq),
            other => Err(MudError::Malformed(format!(
                "unknown quality tier `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MudError {
    /// Not a well-formed document of this dialect.
    Malformed(String),
    /// A policy references an access list that is not defined.
    DanglingAclRef(String),
    /// An access list is defined but referenced by no policy direction.
    UnreferencedAcl(String),
    /// An access list is referenced by both policy directions.
    AclInBothDirections(String),
    DuplicateAceName(String),
    /// An ACE carries no recognizable match target.
    UnknownMatchKind {
        ace: String,
    },
    /// The operation needs at least one ACE.
    EmptyProfile,
}

impl fmt::Display for MudError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MudError::Malformed(msg) => write!(f, "malformed MUD document: {msg}"),
            MudError::DanglingAclRef(name) => {
                write!(f, "policy references undefined access list `{name}`")
            }
            MudError::UnreferencedAcl(name) => {
                write!(f, "access list `{name}` is referenced by no policy")
            }
            MudError::AclInBothDirections(name) => {
                write!(
                    f,
                    "access list `{name}` is referenced by both policy directions"
                )
            }
            MudError::DuplicateAceName(name) => write!(f, "duplicate ACE name `{name}`"),
            MudError::UnknownMatchKind { ace } => {
                write!(f, "ACE `{ace}` has no recognizable match kind")
            }
            MudError::EmptyProfile => write!(f, "profile has no ACEs"),
        }
    }
}

impl core::error::Error for MudError {}

// ---------------------------------------------------------------------------
// Wire layer: the JSON shape of RFC 8520 documents.
// ---------------------------------------------------------------------------

/// RFC 8520 empty leafs are encoded as `[null]` in JSON.
type EmptyLeaf = Vec<Option<()>>;

fn empty_leaf() -> EmptyLeaf {
    vec![None]
}

#[derive(Serialize, Deserialize)]
struct WireDocument {
    #[serde(rename = "ietf-mud:mud")]
    mud: WireMudContainer,
    #[serde(rename = "ietf-access-control-list:acls")]
    acls: WireAcls,
}

#[derive(Serialize, Deserialize)]
struct WireMudContainer {
    #[serde(rename = "mud-version")]
    mud_version: u32,
    #[serde(rename = "mud-url")]
    mud_url: String,
    #[serde(rename = "last-update")]
    last_update: String,
    #[serde(rename = "is-supported")]
    is_supported: bool,
    #[serde(rename = "systeminfo")]
    system_info: String,
    #[serde(rename = "from-device-policy")]
    from_device_policy: WirePolicy,
    #[serde(rename = "to-device-policy")]
    to_device_policy: WirePolicy,
}

#[derive(Serialize, Deserialize)]
struct WirePolicy {
    #[serde(rename = "access-lists")]
    access_lists: WireAccessLists,
}

#[derive(Serialize, Deserialize)]
struct WireAccessLists {
    #[serde(rename = "access-list")]
    access_list: Vec<WireAclRef>,
}

#[derive(Serialize, Deserialize)]
struct WireAclRef {
    name: String,
}

#[derive(Serialize, Deserialize)]
struct WireAcls {
    acl: Vec<WireAcl>,
}

#[derive(Serialize, Deserialize)]
struct WireAcl {
    name: String,
    #[serde(rename = "type")]
    acl_type: String,
    aces: WireAces,
}

#[derive(Serialize, Deserialize)]
struct WireAces {
    ace: Vec<WireAce>,
}

#[derive(Serialize, Deserialize)]
struct WireAce {
    name: String,
    matches: WireMatches,
    actions: WireActions,
}

#[derive(Serialize, Deserialize, Default)]
struct WireMatches {
    #[serde(rename = "ietf-mud:mud", skip_serializing_if = "Option::is_none")]
    mud: Option<WireMudMatch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ipv4: Option<WireIpv4Match>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tcp: Option<WirePortsMatch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    udp: Option<WirePortsMatch>,
}

#[derive(Serialize, Deserialize, Default)]
struct WireMudMatch {
    #[serde(rename = "local-networks", skip_serializing_if = "Option::is_none")]
    local_networks: Option<EmptyLeaf>,
    #[serde(rename = "same-manufacturer", skip_serializing_if = "Option::is_none")]
    same_manufacturer: Option<EmptyLeaf>,
    #[serde(rename = "my-controller", skip_serializing_if = "Option::is_none")]
    my_controller: Option<EmptyLeaf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    controller: Option<String>,
}

#[derive(Serialize, Deserialize, Default)]
struct WireIpv4Match {
    #[serde(skip_serializing_if = "Option::is_none")]
    protocol: Option<u8>,
    #[serde(
        rename = "ietf-acldns:dst-dnsname",
        skip_serializing_if = "Option::is_none"
    )]
    dst_dnsname: Option<String>,
    #[serde(
        rename = "ietf-acldns:src-dnsname",
        skip_serializing_if = "Option::is_none"
    )]
    src_dnsname: Option<String>,
}

#[derive(Serialize, Deserialize, Default)]
struct WirePortsMatch {
    #[serde(rename = "destination-port", skip_serializing_if = "Option::is_none")]
    destination_port: Option<WirePortOp>,
    #[serde(rename = "source-port", skip_serializing_if = "Option::is_none")]
    source_port: Option<WirePortOp>,
}

#[derive(Serialize, Deserialize)]
struct WirePortOp {
    operator: String,
    port: u16,
}

const FROM_DEVICE_ACL: &str = "from-device-acl";
const TO_DEVICE_ACL: &str = "to-device-acl";
const IPV4_ACL_TYPE: &str = "ipv4-acl-type";

// ---------------------------------------------------------------------------
// Parse
// ---------------------------------------------------------------------------

/// Parses an RFC 8520-shaped JSON document into a profile, classifying every
/// ACE by direction and scope.
pub fn parse(text: &str) -> Result<MudProfile, MudError> {
    let doc: WireDocument =
        serde_json::from_str(text).map_err(|e| MudError::Malformed(e.to_string()))?;

    let from_refs: Vec<&str> = doc
        .mud
        .from_device_policy
        .access_lists
        .access_list
        .iter()
        .map(|r| r.name.as_str())
        .collect();
    let to_refs: Vec<&str> = doc
        .mud
        .to_device_policy
        .access_lists
        .access_list
        .iter()
        .map(|r| r.name.as_str())
        .collect();
    for name in &from_refs {
        if to_refs.contains(name) {
            return Err(MudError::AclInBothDirections((*name).to_owned()));
        }
    }

    let find_acl = |name: &str| doc.acls.acl.iter().find(|acl| acl.name == name);
    let mut profile = MudProfile {
        mud_url: doc.mud.mud_url.clone(),
        last_update: doc.mud.last_update.clone(),
        system_info: doc.mud.system_info.clone(),
        ..MudProfile::default()
    };
    let mut seen_names = BTreeSet::new();
    for (refs, direction) in [
        (&from_refs, Direction::FromDevice),
        (&to_refs, Direction::ToDevice),
    ] {
        for name in refs.iter() {
            let acl = find_acl(name).ok_or_else(|| MudError::DanglingAclRef((*name).to_owned()))?;
            for wire_ace in &acl.aces.ace {
                let ace = domain_ace(wire_ace, direction)?;
                if !seen_names.insert(ace.name.clone()) {
                    return Err(MudError::DuplicateAceName(ace.name));
                }
                match direction {
                    Direction::FromDevice => profile.from_device_aces.push(ace),
                    Direction::ToDevice => profile.to_device_aces.push(ace),
                }
            }
        }
    }
    for acl in &doc.acls.acl {
        if !from_refs.contains(&acl.name.as_str()) && !to_refs.contains(&acl.name.as_str()) {
            return Err(MudError::UnreferencedAcl(acl.name.clone()));
        }
    }
    Ok(profile)
}

fn domain_ace(wire: &WireAce, direction: Direction) -> Result<Ace, MudError> {
    if wire.actions.forwarding != "accept" {
        return Err(MudError::Malformed(format!(
            "ACE `{}`: action must be accept, got `{}`",
            wire.name, wire.actions.forwarding
        )));
    }
    let match_kind = if let Some(mud) = &wire.matches.mud {
        let mut kinds = Vec::new();
        if mud.local_networks.is_some() {
            kinds.push(MatchKind::LocalNetworks);
        }
        if mud.same_manufacturer.is_some() {
            kinds.push(MatchKind::SameManufacturer);
        }
        if mud.my_controller.is_some() {
            kinds.push(MatchKind::MyController);
        }
        if let Some(uri) = &mud.controller {
            kinds.push(MatchKind::ControllerClass(uri.clone()));
        }
        if kinds.len() != 1 {
            return Err(MudError::UnknownMatchKind {
                ace: wire.name.clone(),
            });
        }
        kinds.pop().expect("one element")
    } else if let Some(ipv4) = &wire.matches.ipv4 {
        match (&ipv4.dst_dnsname, &ipv4.src_dnsname) {
            (Some(d), None) | (None, Some(d)) => MatchKind::DomainName(d.clone()),
            _ => {
                return Err(MudError::UnknownMatchKind {
                    ace: wire.name.clone(),
                })
            }
        }
    } else {
        return Err(MudError::UnknownMatchKind {
            ace: wire.name.clone(),
        });
    };

    let ports = match (&wire.matches.tcp, &wire.matches.udp) {
        (Some(_), Some(_)) => {
            return Err(MudError::Malformed(format!(
                "ACE `{}`: both tcp and udp port matches",
                wire.name
            )))
        }
        (Some(p), None) | (None, Some(p)) => Some(p),
        (None, None) => None,
    };
    let mut dst_port = None;
    let mut src_port = None;
    if let Some(ports) = ports {
        for (op, slot) in [
            (&ports.destination_port, &mut dst_port),
            (&ports.source_port, &mut src_port),
        ] {
            if let Some(op) = op {
                if op.operator != "eq" {
                    return Err(MudError::Malformed(format!(
                        "ACE `{}`: unsupported port operator `{}`",
                        wire.name, op.operator
                    )));
                }
                *slot = Some(op.port);
            }
        }
    }
    Ok(Ace {
        name: wire.name.clone(),
        direction,
        match_kind,
        protocol: wire.matches.ipv4.as_ref().and_then(|v| v.protocol),
        dst_port,
        src_port,
    })
}

#[derive(Serialize, Deserialize)]
struct WireActions {
    forwarding: String,
}

// ---------------------------------------------------------------------------
// Serialize
// ---------------------------------------------------------------------------

/// Canonical serialization: deterministic key order, two-space indentation,
/// one access list per direction, trailing newline. `parse(serialize(p)) == p`
/// for every valid profile.
pub fn serialize(profile: &MudProfile) -> String {
    let doc = WireDocument {
        mud: WireMudContainer {
            mud_version: 1,
            mud_url: profile.mud_url.clone(),
            last_update: profile.last_update.clone(),
            is_supported: true,
            system_info: profile.system_info.clone(),
            from_device_policy: WirePolicy {
                access_lists: WireAccessLists {
                    access_list: vec![WireAclRef {
                        name: FROM_DEVICE_ACL.to_owned(),
                    }],
                },
            },
            to_device_policy: WirePolicy {
                access_lists: WireAccessLists {
                    access_list: vec![WireAclRef {
                        name: TO_DEVICE_ACL.to_owned(),
                    }],
                },
            },
        },
        acls: WireAcls {
            acl: vec![
                WireAcl {
                    name: FROM_DEVICE_ACL.to_owned(),
                    acl_type: IPV4_ACL_TYPE.to_owned(),
                    aces: WireAces {
                        ace: profile.from_device_aces.iter().map(wire_ace).collect(),
                    },
                },
                WireAcl {
                    name: TO_DEVICE_ACL.to_owned(),
                    acl_type: IPV4_ACL_TYPE.to_owned(),
                    aces: WireAces {
                        ace: profile.to_device_aces.iter().map(wire_ace).collect(),
                    },
                },
            ],
        },
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("profile serialization is total");
    text.push('\n');
    text
}

fn wire_ace(ace: &Ace) -> WireAce {
    let mut matches = WireMatches::default();
    match &ace.match_kind {
        MatchKind::DomainName(name) => {
            let mut ipv4 = WireIpv4Match::default();
            match ace.direction {
                Direction::FromDevice => ipv4.dst_dnsname = Some(name.clone()),
                Direction::ToDevice => ipv4.src_dnsname = Some(name.clone()),
            }
            matches.ipv4 = Some(ipv4);
        }
        MatchKind::ControllerClass(uri) => {
            matches.mud = Some(WireMudMatch {
                controller: Some(uri.clone()),
                ..WireMudMatch::default()
            });
        }
        MatchKind::LocalNetworks => {
            matches.mud = Some(WireMudMatch {
                local_networks: Some(empty_leaf()),
                ..WireMudMatch::default()
            });
        }
        MatchKind::SameManufacturer => {
            matches.mud = Some(WireMudMatch {
                same_manufacturer: Some(empty_leaf()),
                ..WireMudMatch::default()
            });
        }
        MatchKind::MyController => {
            matches.mud = Some(WireMudMatch {
                my_controller: Some(empty_leaf()),
                ..WireMudMatch::default()
            });
        }
    }
    if let Some(protocol) = ace.protocol {
        matches
            .ipv4
            .get_or_insert_with(WireIpv4Match::default)
            .protocol = Some(protocol);
    }
    if ace.dst_port.is_some() || ace.src_port.is_some() {
        let ports = WirePortsMatch {
            destination_port: ace.dst_port.map(|port| WirePortOp {
                operator: "eq".to_owned(),
                port,
            }),
            source_port: ace.src_port.map(|port| WirePortOp {
                operator: "eq".to_owned(),
                port,
            }),
        };
        if ace.protocol == Some(17) {
            matches.udp = Some(ports);
        } else {
            matches.tcp = Some(ports);
        }
    }
    WireAce {
        name: ace.name.clone(),
        matches,
        actions: WireActions {
            forwarding: "accept".to_owned(),
        },
    }
}

// ---------------------------------------------------------------------------
// Quality variants & stats
// ---------------------------------------------------------------------------

/// Derives one of the four quality variants. Variants only ever remove ACEs.
/// The seed drives the LQ rule choice: equal seeds remove the same rule.
pub fn derive_variant(
    profile: &MudProfile,
    tier: QualityTier,
    seed: u64,
) -> Result<MudProfile, MudError> {
    let mut variant = profile.clone();
    match tier {
        QualityTier::Hq => {}
        QualityTier::Mqr => {
            variant
                .from_device_aces
                .retain(|ace| ace.scope() == AceScope::Remote);
            variant
                .to_device_aces
                .retain(|ace| ace.scope() == AceScope::Remote);
        }
        QualityTier::Mqo => {
            variant.to_device_aces.clear();
        }
        QualityTier::Lq => {
            let total = profile.ace_count() as usize;
            if total == 0 {
                return Err(MudError::EmptyProfile);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let drop = rng.gen_range(0..total);
            if drop < variant.from_device_aces.len() {
                variant.from_device_aces.remove(drop);
            } else {
                let i = drop - variant.from_device_aces.len();
                variant.to_device_aces.remove(i);
            }
        }
    }
    Ok(variant)
}

/// Offer-facing metadata of a profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileStats {
    pub ace_count: u32,
    /// Canonical serialization length divided by 1024.
    pub size_kb: f64,
    /// Which of {local, remote, inbound, outbound} flows the profile covers,
    /// joined with `+`, or `none`.
    pub flow_scope: String,
}

pub fn stats(profile: &MudProfile) -> ProfileStats {
    let size_kb = serialize(profile).len() as f64 / 1024.0;
    let mut tokens = Vec::new();
    if profile.aces().any(|ace| ace.scope() == AceScope::Local) {
        tokens.push("local");
    }
    if profile.aces().any(|ace| ace.scope() == AceScope::Remote) {
        tokens.push("remote");
    }
    if !profile.to_device_aces.is_empty() {
        tokens.push("inbound");
    }
    if !profile.from_device_aces.is_empty() {
        tokens.push("outbound");
    }
    let flow_scope = if tokens.is_empty() {
        "none".to_owned()
    } else {
        tokens.join("+")
    };
    ProfileStats {
        ace_count: profile.ace_count(),
        size_kb,
        flow_scope,
    }
}

/// Bundled sample profiles for three representative consumer IoT devices.
pub mod fixtures {
    pub const AMAZON_ECHO: &str = include_str!("../fixtures/amazon_echo.json");
    pub const LIFX_LIGHTBULB: &str = include_str!("../fixtures/lifx_lightbulb.json");
    pub const SAMSUNG_CAMERA: &str = include_str!("../fixtures/samsung_camera.json");

    /// `(key, document)` pairs for all bundled fixtures.
    pub fn all() -> [(&'static str, &'static str); 3] {
        [
            ("amazon-echo", AMAZON_ECHO),
            ("lifx-lightbulb", LIFX_LIGHTBULB),
            ("samsung-camera", SAMSUNG_CAMERA),
        ]
    }
}
