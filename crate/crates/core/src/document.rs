//! Versioned on-disk representation of a [`TransformSet`].
//!
//! JSON with one output array per channel. Floats are written in shortest
//! round-trip form, so serialize → deserialize reproduces the grid values
//! bit for bit.

use crate::colorspace::Channel;
use crate::error::{Error, Result};
use crate::transfer::{ChannelTransform, TransformSet};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TransformDocument {
    format_version: u32,
    grid_points: usize,
    cyan: Vec<f64>,
    magenta: Vec<f64>,
    yellow: Vec<f64>,
    metadata: BTreeMap<String, String>,
}

/// Render a transform set as a JSON document string.
pub fn serialize(ts: &TransformSet) -> String {
    let doc = TransformDocument {
        format_version: FORMAT_VERSION,
        grid_points: ts.grid_size() + 1,
        cyan: ts.channel(Channel::Cyan).outputs().to_vec(),
        magenta: ts.channel(Channel::Magenta).outputs().to_vec(),
        yellow: ts.channel(Channel::Yellow).outputs().to_vec(),
        metadata: ts.metadata().clone(),
    };
    serde_json::to_string_pretty(&doc).expect("document serialization cannot fail")
}

/// Parse and validate a JSON transform document. Malformed JSON or schema,
/// an unknown format version, and invariant violations (non-monotone or
/// unpinned outputs) are reported as distinct error categories.
pub fn deserialize(text: &str) -> Result<TransformSet> {
    let doc: TransformDocument =
        serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: doc.format_version,
            expected: FORMAT_VERSION,
        });
    }
    for (name, outputs) in [
        ("cyan", &doc.cyan),
        ("magenta", &doc.magenta),
        ("yellow", &doc.yellow),
    ] {
        if outputs.len() != doc.grid_points {
            return Err(Error::MalformedDocument(format!(
                "{name} holds {} values but grid_points is {}",
                outputs.len(),
                doc.grid_points
            )));
        }
    }
    if doc.grid_points < 2 {
        return Err(Error::MalformedDocument(format!(
            "grid_points must be at least 2, got {}",
            doc.grid_points
        )));
    }
    TransformSet::new(
        ChannelTransform::new(Channel::Cyan, doc.cyan)?,
        ChannelTransform::new(Channel::Magenta, doc.magenta)?,
        ChannelTransform::new(Channel::Yellow, doc.yellow)?,
        doc.metadata,
    )
}

pub fn write_document(ts: &TransformSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, serialize(ts)).map_err(|source| Error::FileWrite {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_document(path: impl AsRef<Path>) -> Result<TransformSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::FileRead {
        path: path.to_path_buf(),
        source,
    })?;
    deserialize(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_set() -> TransformSet {
        let mut metadata = BTreeMap::new();
        metadata.insert("source".to_string(), "median-of-3".to_string());
        TransformSet::from_channel_fns(
            64,
            [&|x: f64| x.powf(0.62), &|x: f64| x, &|x: f64| x.powf(1.21)],
            metadata,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ts = sample_set();
        let text = serialize(&ts);
        let back = deserialize(&text).unwrap();
        assert_eq!(back, ts);
        for channel in Channel::ALL {
            for (a, b) in ts
                .channel(channel)
                .outputs()
                .iter()
                .zip(back.channel(channel).outputs())
            {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        // Re-serializing the parsed set reproduces the exact document.
        assert_eq!(serialize(&back), text);
    }

    #[test]
    fn rejects_non_monotone_outputs() {
        let text = r#"{
            "format_version": 1,
            "grid_points": 4,
            "cyan": [0.0, 0.5, 0.4, 1.0],
            "magenta": [0.0, 0.3, 0.6, 1.0],
            "yellow": [0.0, 0.3, 0.6, 1.0],
            "metadata": {}
        }"#;
        assert!(matches!(
            deserialize(text),
            Err(Error::NonMonotone {
                channel: Channel::Cyan,
                index: 2
            })
        ));
    }

    #[test]
    fn rejects_missing_channel_as_schema_error() {
        let text = r#"{
            "format_version": 1,
            "grid_points": 2,
            "cyan": [0.0, 1.0],
            "magenta": [0.0, 1.0],
            "metadata": {}
        }"#;
        assert!(matches!(
            deserialize(text),
            Err(Error::MalformedDocument(_))
        ));
    }

    #[test]
    fn rejects_unknown_version() {
        let text = r#"{
            "format_version": 7,
            "grid_points": 2,
            "cyan": [0.0, 1.0],
            "magenta": [0.0, 1.0],
            "yellow": [0.0, 1.0],
            "metadata": {}
        }"#;
        assert!(matches!(
            deserialize(text),
            Err(Error::UnsupportedVersion { found: 7, .. })
        ));
    }

    #[test]
    fn rejects_malformed_json_and_length_mismatch() {
        assert!(matches!(
            deserialize("{ not json"),
            Err(Error::MalformedDocument(_))
        ));
        let text = r#"{
            "format_version": 1,
            "grid_points": 3,
            "cyan": [0.0, 1.0],
            "magenta": [0.0, 0.5, 1.0],
            "yellow": [0.0, 0.5, 1.0],
            "metadata": {}
        }"#;
        assert!(matches!(
            deserialize(text),
            Err(Error::MalformedDocument(_))
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transform.json");
        let ts = sample_set();
        write_document(&ts, &path).unwrap();
        assert_eq!(read_document(&path).unwrap(), ts);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn arbitrary_monotone_sets_round_trip(raw in proptest::collection::vec(0.0..1.0f64, 3..40)) {
            // Sort the raw values into a monotone interior, pin the ends.
            let mut outputs = raw;
            outputs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            outputs[0] = 0.0;
            let last = outputs.len() - 1;
            outputs[last] = 1.0;
            let ts = TransformSet::new(
                ChannelTransform::new(Channel::Cyan, outputs.clone()).unwrap(),
                ChannelTransform::new(Channel::Magenta, outputs.clone()).unwrap(),
                ChannelTransform::new(Channel::Yellow, outputs).unwrap(),
                BTreeMap::new(),
            )
            .unwrap();
            prop_assert_eq!(deserialize(&serialize(&ts)).unwrap(), ts);
        }
    }
}
