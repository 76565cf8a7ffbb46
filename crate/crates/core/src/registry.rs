//! Catalog of leak-prone resource classes and the APIs that acquire and
//! release them.
//!
//! The built-in catalog covers the 37 classes known to leak in Android apps.
//! Users can override or extend it with a JSON registry file; file entries win
//! on class-name collisions.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Token used in place of a receiver class to match any receiver.
pub const WILDCARD: &str = "*";

/// Method name used by constructor signatures, e.g. `java.io.FileReader.<init>`.
pub const CONSTRUCTOR: &str = "<init>";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("registry format error at {locus}: {message}")]
    Format { locus: String, message: String },
    #[error("invalid registry: {0}")]
    Validation(String),
    #[error("call `{method}` matches more than one resource spec: {}", specs.join(", "))]
    AmbiguousMatch { method: String, specs: Vec<String> },
}

/// One API entry point: receiver class, method name and optional arity.
///
/// The textual form is `Receiver.method[/arity][@arg]`. A receiver of `*`
/// matches any receiver. The `@arg` suffix marks APIs whose resource is passed
/// as an argument (listener registration) instead of being the receiver or the
/// returned value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApiSignature {
    pub receiver_class: String,
    pub method_name: String,
    pub arity: Option<usize>,
    pub resource_arg: bool,
}

impl ApiSignature {
    pub fn is_wildcard(&self) -> bool {
        self.receiver_class == WILDCARD
    }

    pub fn accepts_arity(&self, arity: usize) -> bool {
        self.arity.map_or(true, |a| a == arity)
    }

    /// Name and arity agree with a call, ignoring the receiver.
    pub fn matches_name(&self, method: &str, arity: usize) -> bool {
        self.method_name == method && self.accepts_arity(arity)
    }
}

impl fmt::Display for ApiSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.receiver_class, self.method_name)?;
        if let Some(a) = self.arity {
            write!(f, "/{a}")?;
        }
        if self.resource_arg {
            f.write_str("@arg")?;
        }
        Ok(())
    }
}

impl FromStr for ApiSignature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (s, resource_arg) = match s.strip_suffix("@arg") {
            Some(rest) => (rest, true),
            None => (s, false),
        };
        let (s, arity) = match s.rsplit_once('/') {
            Some((head, n)) => {
                let n = n
                    .parse::<usize>()
                    .map_err(|_| format!("bad arity `{n}` in signature `{s}`"))?;
                (head, Some(n))
            }
            None => (s, None),
        };
        let (receiver, method) = s
            .rsplit_once('.')
            .ok_or_else(|| format!("signature `{s}` lacks a `Receiver.method` form"))?;
        if receiver.is_empty() {
            return Err(format!("signature `{s}` has an empty receiver class"));
        }
        if method.is_empty() {
            return Err(format!("signature `{s}` has an empty method name"));
        }
        let valid_method =
            method == CONSTRUCTOR || method.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$');
        if !valid_method {
            return Err(format!("signature `{s}` has an invalid method name `{method}`"));
        }
        Ok(ApiSignature {
            receiver_class: receiver.to_string(),
            method_name: method.to_string(),
            arity,
            resource_arg,
        })
    }
}

impl Serialize for ApiSignature {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ApiSignature {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What leaking a resource costs the device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConsequenceKind {
    #[serde(rename = "I")]
    MemoryWaste,
    #[serde(rename = "II")]
    EnergyWaste,
    #[serde(rename = "III")]
    FunctionalityLoss,
}

impl ConsequenceKind {
    pub const ALL: [ConsequenceKind; 3] = [
        ConsequenceKind::MemoryWaste,
        ConsequenceKind::EnergyWaste,
        ConsequenceKind::FunctionalityLoss,
    ];

    pub fn mark(self) -> &'static str {
        match self {
            ConsequenceKind::MemoryWaste => "I",
            ConsequenceKind::EnergyWaste => "II",
            ConsequenceKind::FunctionalityLoss => "III",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            ConsequenceKind::MemoryWaste => "memory waste",
            ConsequenceKind::EnergyWaste => "energy waste",
            ConsequenceKind::FunctionalityLoss => "functionality loss",
        }
    }

    pub fn from_mark(mark: &str) -> Option<Self> {
        match mark {
            "I" => Some(ConsequenceKind::MemoryWaste),
            "II" => Some(ConsequenceKind::EnergyWaste),
            "III" => Some(ConsequenceKind::FunctionalityLoss),
            _ => None,
        }
    }
}

impl fmt::Display for ConsequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mark())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceSpec {
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "acquire")]
    pub acquire_sigs: Vec<ApiSignature>,
    #[serde(rename = "release")]
    pub release_sigs: Vec<ApiSignature>,
    /// Acquire and release calls must balance numerically.
    pub counted: bool,
    /// Only one client may hold the resource at a time.
    pub exclusive: bool,
    /// Releasing this object also releases resources passed to its constructor.
    pub closes_wrapped: bool,
    pub consequence: ConsequenceKind,
}

impl ResourceSpec {
    /// Simple (unqualified) class name, keeping nested-class qualifiers such
    /// as `PowerManager.WakeLock` out of it.
    pub fn simple_name(&self) -> &str {
        self.class_name.rsplit('.').next().unwrap_or(&self.class_name)
    }

    pub fn is_release(&self, method: &str, arity: usize) -> bool {
        self.release_sigs.iter().any(|s| s.matches_name(method, arity))
    }

    fn validate(&self) -> Result<(), RegistryError> {
        if self.class_name.trim().is_empty() {
            return Err(RegistryError::Validation("spec with empty class name".into()));
        }
        if self.acquire_sigs.is_empty() {
            return Err(RegistryError::Validation(format!(
                "{} has no acquire signatures",
                self.class_name
            )));
        }
        if self.release_sigs.is_empty() {
            return Err(RegistryError::Validation(format!(
                "{} has no release signatures",
                self.class_name
            )));
        }
        Ok(())
    }
}

/// Index of a spec inside its [`Registry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpecId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LifecyclePair {
    pub acquirer: String,
    pub releaser: String,
}

/// Static type information available for the receiver of a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverType<'a> {
    Known(&'a str),
    Unknown,
}

/// A call site reduced to what signature matching needs.
#[derive(Debug, Clone, Copy)]
pub struct CallSite<'a> {
    pub receiver: ReceiverType<'a>,
    pub method: &'a str,
    pub arity: usize,
}

impl<'a> CallSite<'a> {
    pub fn new(receiver: ReceiverType<'a>, method: &'a str, arity: usize) -> Self {
        CallSite { receiver, method, arity }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecMatch {
    pub spec: SpecId,
    /// The match came from a `*` signature rather than a typed one.
    pub via_wildcard: bool,
    /// The matching signature places the resource in an argument.
    pub resource_arg: bool,
}

/// Whether a declared type name refers to the fully-qualified class `fqn`.
///
/// Imports are not resolved: a simple or partially qualified name matches when
/// it is a dot-aligned suffix of `fqn`. Generic arguments and array brackets
/// are ignored.
pub fn type_matches(declared: &str, fqn: &str) -> bool {
    let declared = strip_type_decorations(declared);
    if declared.is_empty() {
        return false;
    }
    if declared == fqn {
        return true;
    }
    fqn.len() > declared.len()
        && fqn.ends_with(declared)
        && fqn.as_bytes()[fqn.len() - declared.len() - 1] == b'.'
}

fn strip_type_decorations(t: &str) -> &str {
    let t = t.trim();
    let t = t.split('<').next().unwrap_or(t);
    t.trim_end_matches("[]").trim()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    specs: Vec<ResourceSpec>,
    by_class: HashMap<String, SpecId>,
    lifecycle_pairs: Vec<LifecyclePair>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default)]
    specs: Vec<ResourceSpec>,
    #[serde(default)]
    lifecycle_pairs: Vec<[String; 2]>,
}

impl Registry {
    pub fn new(
        specs: Vec<ResourceSpec>,
        lifecycle_pairs: Vec<LifecyclePair>,
    ) -> Result<Registry, RegistryError> {
        let mut by_class = HashMap::new();
        for (i, spec) in specs.iter().enumerate() {
            spec.validate()?;
            if by_class.insert(spec.class_name.clone(), SpecId(i)).is_some() {
                return Err(RegistryError::Validation(format!(
                    "duplicate class {}",
                    spec.class_name
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for pair in &lifecycle_pairs {
            if pair.acquirer.is_empty() || pair.releaser.is_empty() {
                return Err(RegistryError::Validation("empty lifecycle callback name".into()));
            }
            if !seen.insert((pair.acquirer.clone(), pair.releaser.clone())) {
                return Err(RegistryError::Validation(format!(
                    "duplicate lifecycle pair ({}, {})",
                    pair.acquirer, pair.releaser
                )));
            }
        }
        Ok(Registry { specs, by_class, lifecycle_pairs })
    }

    /// Parses a registry document without merging it over the built-in one.
    pub fn from_json_str(text: &str) -> Result<Registry, RegistryError> {
        let file = parse_file(text)?;
        let pairs = file
            .lifecycle_pairs
            .into_iter()
            .map(|[a, r]| LifecyclePair { acquirer: a, releaser: r })
            .collect();
        Registry::new(file.specs, pairs)
    }

    pub fn to_json(&self) -> String {
        let file = RegistryFile {
            specs: self.specs.clone(),
            lifecycle_pairs: self
                .lifecycle_pairs
                .iter()
                .map(|p| [p.acquirer.clone(), p.releaser.clone()])
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("registry serializes")
    }

    pub fn specs(&self) -> &[ResourceSpec] {
        &self.specs
    }

    pub fn spec(&self, id: SpecId) -> &ResourceSpec {
        &self.specs[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = SpecId> {
        (0..self.specs.len()).map(SpecId)
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn lookup(&self, class_name: &str) -> Option<SpecId> {
        self.by_class.get(class_name).copied()
    }

    pub fn get(&self, class_name: &str) -> Option<&ResourceSpec> {
        self.lookup(class_name).map(|id| self.spec(id))
    }

    /// Finds the spec whose class a declared type name refers to.
    pub fn resolve_type(&self, declared: &str) -> Option<SpecId> {
        if let Some(id) = self.lookup(strip_type_decorations(declared)) {
            return Some(id);
        }
        let mut hits = self.ids().filter(|&id| type_matches(declared, &self.spec(id).class_name));
        let first = hits.next()?;
        match hits.next() {
            None => Some(first),
            Some(_) => None,
        }
    }

    pub fn lifecycle_pairs(&self) -> &[LifecyclePair] {
        &self.lifecycle_pairs
    }

    pub fn match_acquire(&self, site: &CallSite<'_>) -> Result<Option<SpecMatch>, RegistryError> {
        self.match_in(site, |s| &s.acquire_sigs)
    }

    pub fn match_release(&self, site: &CallSite<'_>) -> Result<Option<SpecMatch>, RegistryError> {
        self.match_in(site, |s| &s.release_sigs)
    }

    fn match_in(
        &self,
        site: &CallSite<'_>,
        sigs_of: impl Fn(&ResourceSpec) -> &Vec<ApiSignature>,
    ) -> Result<Option<SpecMatch>, RegistryError> {
        let mut typed: Vec<SpecMatch> = Vec::new();
        let mut wild: Vec<SpecMatch> = Vec::new();
        for id in self.ids() {
            let spec = self.spec(id);
            let mut typed_hit = None;
            let mut wild_hit = None;
            for sig in sigs_of(spec) {
                if !sig.matches_name(site.method, site.arity) {
                    continue;
                }
                if sig.is_wildcard() {
                    wild_hit.get_or_insert(sig.resource_arg);
                } else if let ReceiverType::Known(t) = site.receiver {
                    if type_matches(t, &sig.receiver_class) {
                        typed_hit.get_or_insert(sig.resource_arg);
                    }
                }
            }
            if let Some(resource_arg) = typed_hit {
                typed.push(SpecMatch { spec: id, via_wildcard: false, resource_arg });
            } else if let Some(resource_arg) = wild_hit {
                wild.push(SpecMatch { spec: id, via_wildcard: true, resource_arg });
            }
        }
        let candidates = if typed.is_empty() { wild } else { typed };
        match candidates.len() {
            0 => Ok(None),
            1 => Ok(Some(candidates[0])),
            _ => Err(RegistryError::AmbiguousMatch {
                method: site.method.to_string(),
                specs: candidates
                    .iter()
                    .map(|m| self.spec(m.spec).class_name.clone())
                    .collect(),
            }),
        }
    }

    /// Overlays `other` on `self`: specs of `other` replace same-named specs,
    /// new specs are appended, and lifecycle pairs are unioned.
    fn merged_with(&self, other: Registry) -> Result<Registry, RegistryError> {
        let mut specs = self.specs.clone();
        for spec in other.specs {
            match self.lookup(&spec.class_name) {
                Some(id) => specs[id.0] = spec,
                None => specs.push(spec),
            }
        }
        let mut pairs = self.lifecycle_pairs.clone();
        for pair in other.lifecycle_pairs {
            if !pairs.contains(&pair) {
                pairs.push(pair);
            }
        }
        Registry::new(specs, pairs)
    }
}

fn parse_file(text: &str) -> Result<RegistryFile, RegistryError> {
    if text.trim().is_empty() {
        return Ok(RegistryFile { specs: Vec::new(), lifecycle_pairs: Vec::new() });
    }
    serde_json::from_str(text).map_err(|e| RegistryError::Format {
        locus: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Loads a registry file and merges it over [`builtin_registry`].
pub fn load_registry(path: &Path) -> Result<Registry, RegistryError> {
    let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let overlay = Registry::from_json_str(&text)?;
    builtin_registry().merged_with(overlay)
}

struct Entry {
    class: &'static str,
    acquire: &'static [&'static str],
    release: &'static [&'static str],
    counted: bool,
    exclusive: bool,
    closes_wrapped: bool,
    consequence: ConsequenceKind,
}

const fn plain(
    class: &'static str,
    acquire: &'static [&'static str],
    release: &'static [&'static str],
) -> Entry {
    Entry {
        class,
        acquire,
        release,
        counted: false,
        exclusive: false,
        closes_wrapped: false,
        consequence: ConsequenceKind::MemoryWaste,
    }
}

const fn decorator(class: &'static str, acquire: &'static [&'static str]) -> Entry {
    Entry { closes_wrapped: true, ..plain(class, acquire, &["*.close/0"]) }
}

const fn stream(class: &'static str, acquire: &'static [&'static str]) -> Entry {
    plain(class, acquire, &["*.close/0"])
}

use ConsequenceKind::{EnergyWaste, FunctionalityLoss};

// Release signatures written as `*.close/0` are rewritten to the spec's own
// class when the table is built; release matching on a tracked binding only
// looks at the method name and arity anyway.
//
// Acquire pairings follow the Android SDK and JDK API references. The source
// for each entry is noted next to it.
const BUILTIN: &[Entry] = &[
    // Android platform resources.
    //
    // SQLiteDatabase.query/rawQuery, ContentResolver.query,
    // ContentProviderClient.query, SQLiteQueryBuilder.query and
    // DownloadManager.query all return a Cursor (developer.android.com,
    // android.database.sqlite / android.content / android.app).
    // CancellationSignal.cancel aborts an in-flight query.
    plain(
        "android.database.Cursor",
        &[
            "android.database.sqlite.SQLiteDatabase.query",
            "android.database.sqlite.SQLiteDatabase.rawQuery",
            "android.database.sqlite.SQLiteDatabase.queryWithFactory",
            "android.database.sqlite.SQLiteDatabase.rawQueryWithFactory",
            "android.database.sqlite.SQLiteQueryBuilder.query",
            "android.content.ContentResolver.query",
            "android.content.ContentProviderClient.query",
            "android.app.DownloadManager.query",
            "*.rawQuery",
            "*.query",
        ],
        &["*.close/0", "android.os.CancellationSignal.cancel/0@arg"],
    ),
    // SQLiteOpenHelper.getWritableDatabase/getReadableDatabase,
    // SQLiteDatabase.openDatabase/openOrCreateDatabase/create,
    // Context.openOrCreateDatabase.
    plain(
        "android.database.sqlite.SQLiteDatabase",
        &[
            "android.database.sqlite.SQLiteOpenHelper.getWritableDatabase/0",
            "android.database.sqlite.SQLiteOpenHelper.getReadableDatabase/0",
            "android.database.sqlite.SQLiteDatabase.openDatabase",
            "android.database.sqlite.SQLiteDatabase.openOrCreateDatabase",
            "android.database.sqlite.SQLiteDatabase.create/1",
            "android.content.Context.openOrCreateDatabase",
            "*.getWritableDatabase/0",
            "*.getReadableDatabase/0",
            "*.openOrCreateDatabase",
        ],
        &["*.close/0"],
    ),
    // PowerManager.WakeLock.acquire()/acquire(long); wake locks are reference
    // counted unless setReferenceCounted(false) is called. The lock object
    // from PowerManager.newWakeLock is not held until acquire().
    Entry {
        counted: true,
        consequence: EnergyWaste,
        ..plain(
            "android.os.PowerManager.WakeLock",
            &["android.os.PowerManager.WakeLock.acquire"],
            &["android.os.PowerManager.WakeLock.release"],
        )
    },
    // new MediaPlayer() and MediaPlayer.create(...) (android.media.MediaPlayer).
    // Audio focus requested for playback is given back with
    // AudioManager.abandonAudioFocus(listener).
    plain(
        "android.media.MediaPlayer",
        &["android.media.MediaPlayer.<init>/0", "android.media.MediaPlayer.create"],
        &[
            "android.media.MediaPlayer.release/0",
            "android.media.MediaPlayer.stop/0",
            "android.media.AudioManager.abandonAudioFocus/1@arg",
        ],
    ),
    // WifiManager.WifiLock.acquire(); reference counted by default
    // (WifiLock.setReferenceCounted). WifiManager.disableNetwork(netId) drops
    // the network the lock keeps alive.
    Entry {
        counted: true,
        consequence: EnergyWaste,
        ..plain(
            "android.net.wifi.WifiManager.WifiLock",
            &["android.net.wifi.WifiManager.WifiLock.acquire/0"],
            &[
                "android.net.wifi.WifiManager.WifiLock.release/0",
                "android.net.wifi.WifiManager.disableNetwork/1@arg",
            ],
        )
    },
    // LocationManager.requestLocationUpdates/requestSingleUpdate register the
    // listener argument; removeUpdates(listener) unregisters it. Sensor
    // listeners follow the same protocol via SensorManager.
    Entry {
        consequence: EnergyWaste,
        ..plain(
            "android.location.LocationListener",
            &[
                "android.location.LocationManager.requestLocationUpdates@arg",
                "android.location.LocationManager.requestSingleUpdate@arg",
            ],
            &[
                "android.location.LocationManager.removeUpdates/1@arg",
                "android.hardware.SensorManager.unregisterListener@arg",
            ],
        )
    },
    // SQLiteOpenHelper subclasses are constructed directly; close() releases
    // the cached database.
    plain(
        "android.database.sqlite.SQLiteOpenHelper",
        &["android.database.sqlite.SQLiteOpenHelper.<init>"],
        &["*.close/0"],
    ),
    // MotionEvent.obtain/obtainNoHistory hand out pooled events; recycle()
    // returns them.
    plain(
        "android.view.MotionEvent",
        &["android.view.MotionEvent.obtain", "android.view.MotionEvent.obtainNoHistory/1"],
        &["android.view.MotionEvent.recycle/0"],
    ),
    // ParcelFileDescriptor.open, ContentResolver.openFileDescriptor.
    plain(
        "android.os.ParcelFileDescriptor",
        &[
            "android.os.ParcelFileDescriptor.open",
            "android.content.ContentResolver.openFileDescriptor",
            "*.openFileDescriptor",
        ],
        &["*.close/0"],
    ),
    // Parcel.obtain(); recycle() returns the parcel to the pool.
    plain("android.os.Parcel", &["android.os.Parcel.obtain/0"], &["android.os.Parcel.recycle/0"]),
    // Camera.open()/open(int); release() frees it for other apps, unlock()
    // hands it to another process, stopPreview/stopFaceDetection end the
    // running sessions.
    Entry {
        exclusive: true,
        consequence: FunctionalityLoss,
        ..plain(
            "android.hardware.Camera",
            &["android.hardware.Camera.open"],
            &[
                "android.hardware.Camera.release/0",
                "android.hardware.Camera.unlock/0",
                "android.hardware.Camera.stopPreview/0",
                "android.hardware.Camera.stopFaceDetection/0",
            ],
        )
    },
    // General Java platform resources.
    //
    // URL.openStream, URLConnection/HttpURLConnection.getInputStream,
    // Socket.getInputStream, Process.getInputStream,
    // ContentResolver.openInputStream, AssetManager.open.
    stream(
        "java.io.InputStream",
        &[
            "java.net.URL.openStream/0",
            "java.net.URLConnection.getInputStream/0",
            "java.net.HttpURLConnection.getInputStream/0",
            "javax.net.ssl.HttpsURLConnection.getInputStream/0",
            "java.net.Socket.getInputStream/0",
            "java.lang.Process.getInputStream/0",
            "android.content.ContentResolver.openInputStream/1",
            "android.content.res.AssetManager.open",
            "*.openStream/0",
            "*.openInputStream/1",
        ],
    ),
    // new FileInputStream(..), Context.openFileInput(name).
    stream(
        "java.io.FileInputStream",
        &[
            "java.io.FileInputStream.<init>/1",
            "android.content.Context.openFileInput/1",
            "*.openFileInput/1",
        ],
    ),
    // new FileOutputStream(..), Context.openFileOutput(name, mode).
    stream(
        "java.io.FileOutputStream",
        &[
            "java.io.FileOutputStream.<init>",
            "android.content.Context.openFileOutput/2",
            "*.openFileOutput/2",
        ],
    ),
    decorator("java.io.BufferedReader", &["java.io.BufferedReader.<init>"]),
    // Direct JDK subclasses without an entry of their own are constructed
    // through the parent class's entry.
    decorator(
        "java.io.FilterOutputStream",
        &["java.io.FilterOutputStream.<init>/1", "java.io.PrintStream.<init>"],
    ),
    // URLConnection/Socket/Process.getOutputStream,
    // ContentResolver.openOutputStream.
    stream(
        "java.io.OutputStream",
        &[
            "java.net.URLConnection.getOutputStream/0",
            "java.net.HttpURLConnection.getOutputStream/0",
            "javax.net.ssl.HttpsURLConnection.getOutputStream/0",
            "java.net.Socket.getOutputStream/0",
            "java.lang.Process.getOutputStream/0",
            "android.content.ContentResolver.openOutputStream",
            "*.openOutputStream",
        ],
    ),
    decorator(
        "java.io.FilterInputStream",
        &[
            "java.io.FilterInputStream.<init>/1",
            "java.io.BufferedInputStream.<init>",
            "java.io.DataInputStream.<init>/1",
            "java.io.PushbackInputStream.<init>",
            "java.util.zip.GZIPInputStream.<init>",
        ],
    ),
    // DefaultHttpClient implements Closeable in HttpClient 4.3+; older code
    // shuts the connection manager down instead.
    stream(
        "org.apache.http.impl.client.DefaultHttpClient",
        &["org.apache.http.impl.client.DefaultHttpClient.<init>"],
    ),
    decorator("java.io.BufferedOutputStream", &["java.io.BufferedOutputStream.<init>"]),
    // Semaphore.acquire/acquireUninterruptibly/tryAcquire take permits that
    // release() returns.
    Entry {
        exclusive: true,
        consequence: FunctionalityLoss,
        ..plain(
            "java.util.concurrent.Semaphore",
            &[
                "java.util.concurrent.Semaphore.acquire",
                "java.util.concurrent.Semaphore.acquireUninterruptibly",
            ],
            &["java.util.concurrent.Semaphore.release"],
        )
    },
    decorator("java.io.BufferedWriter", &["java.io.BufferedWriter.<init>"]),
    stream("java.io.ByteArrayOutputStream", &["java.io.ByteArrayOutputStream.<init>"]),
    // FileWriter is an OutputStreamWriter over a FileOutputStream it opens.
    decorator(
        "java.io.OutputStreamWriter",
        &["java.io.OutputStreamWriter.<init>", "java.io.FileWriter.<init>"],
    ),
    // new Socket(..), SocketFactory.createSocket(..).
    stream(
        "java.net.Socket",
        &["java.net.Socket.<init>", "javax.net.SocketFactory.createSocket"],
    ),
    stream("java.util.Scanner", &["java.util.Scanner.<init>"]),
    // AndroidHttpClient.newInstance(..) returns an HttpClient that must be
    // closed.
    stream(
        "org.apache.http.impl.client.HttpClient",
        &["android.net.http.AndroidHttpClient.newInstance"],
    ),
    decorator("java.io.ObjectInputStream", &["java.io.ObjectInputStream.<init>/1"]),
    decorator("java.io.ObjectOutputStream", &["java.io.ObjectOutputStream.<init>/1"]),
    stream("java.io.PipedOutputStream", &["java.io.PipedOutputStream.<init>"]),
    // JsonFactory.createParser/createJsonParser (jackson-core).
    stream(
        "com.fasterxml.jackson.core.JsonParser",
        &[
            "com.fasterxml.jackson.core.JsonFactory.createParser",
            "com.fasterxml.jackson.core.JsonFactory.createJsonParser",
            "*.createParser",
            "*.createJsonParser",
        ],
    ),
    // Gson's JsonParser reads from a stream JsonReader, which owns the
    // underlying Reader and closes it on close().
    decorator("com.google.gson.JsonParser", &["com.google.gson.stream.JsonReader.<init>/1"]),
    decorator("java.io.DataOutputStream", &["java.io.DataOutputStream.<init>/1"]),
    // FileReader is an InputStreamReader over a FileInputStream it opens.
    decorator(
        "java.io.InputStreamReader",
        &["java.io.InputStreamReader.<init>", "java.io.FileReader.<init>"],
    ),
    stream("java.io.PipedInputStream", &["java.io.PipedInputStream.<init>"]),
    stream("java.util.Formatter", &["java.util.Formatter.<init>"]),
    stream("java.util.logging.FileHandler", &["java.util.logging.FileHandler.<init>"]),
];

const DEFAULT_LIFECYCLE_PAIRS: &[(&str, &str)] = &[
    ("onCreate", "onDestroy"),
    ("onStart", "onStop"),
    ("onResume", "onPause"),
    ("surfaceCreated", "surfaceDestroyed"),
    ("onCreateView", "onDestroyView"),
];

/// The default catalog: 11 Android platform and 26 Java platform resource
/// classes with their leak consequences.
pub fn builtin_registry() -> Registry {
    let specs = BUILTIN
        .iter()
        .map(|e| {
            let sig = |s: &&str| -> ApiSignature {
                let s = match s.strip_prefix("*.close") {
                    Some(rest) => format!("{}.close{}", e.class, rest),
                    None => s.to_string(),
                };
                s.parse().expect("builtin signature parses")
            };
            ResourceSpec {
                class_name: e.class.to_string(),
                acquire_sigs: e.acquire.iter().map(sig).collect(),
                release_sigs: e.release.iter().map(sig).collect(),
                counted: e.counted,
                exclusive: e.exclusive,
                closes_wrapped: e.closes_wrapped,
                consequence: e.consequence,
            }
        })
        .collect();
    let pairs = DEFAULT_LIFECYCLE_PAIRS
        .iter()
        .map(|(a, r)| LifecyclePair { acquirer: a.to_string(), releaser: r.to_string() })
        .collect();
    Registry::new(specs, pairs).expect("builtin registry is valid")
}
