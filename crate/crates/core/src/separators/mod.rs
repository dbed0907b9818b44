//! Separators under test. The oracle separators use the true sources and
//! are robust to every deformation by construction; external separators
//! wrap a trained model behind a file-based process protocol.

mod external;
mod oracle;

pub use external::{
    separate_external, ExternalSeparator, INPUT_PLACEHOLDER, OUTDIR_PLACEHOLDER,
    SPEAKERS_PLACEHOLDER,
};
pub use oracle::{ibm_masks, identity_split, irm_masks, separate_ibm, separate_irm};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::SeparationResult;
use crate::signal::{StftConfig, Waveform, WindowKind};

/// Default analysis for the oracle masks: 8 ms Hann frames at 50% overlap.
/// Probe stimuli switch sources every few tens of milliseconds, so a mask
/// needs frames shorter than one tone segment; with 32 ms frames every frame
/// straddles a switch.
pub const ORACLE_STFT: StftConfig = StftConfig {
    window_len: 64,
    hop: 32,
    window: WindowKind::Hann,
    fft_len: 64,
};

fn oracle_stft() -> StftConfig {
    ORACLE_STFT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeparatorKind {
    IrmOracle {
        #[serde(default = "oracle_stft")]
        stft: StftConfig,
    },
    IbmOracle {
        #[serde(default = "oracle_stft")]
        stft: StftConfig,
    },
    IdentitySplit,
    External(ExternalSeparator),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatorDescriptor {
    /// Report identifier; defaults to the kind name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(flatten)]
    pub kind: SeparatorKind,
}

impl SeparatorDescriptor {
    pub fn irm() -> Self {
        Self {
            id: None,
            kind: SeparatorKind::IrmOracle {
                stft: ORACLE_STFT,
            },
        }
    }

    pub fn ibm() -> Self {
        Self {
            id: None,
            kind: SeparatorKind::IbmOracle {
                stft: ORACLE_STFT,
            },
        }
    }

    pub fn identity_split() -> Self {
        Self {
            id: None,
            kind: SeparatorKind::IdentitySplit,
        }
    }

    pub fn external(id: impl Into<String>, sep: ExternalSeparator) -> Self {
        Self {
            id: Some(id.into()),
            kind: SeparatorKind::External(sep),
        }
    }

    pub fn id(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            match self.kind {
                SeparatorKind::IrmOracle { .. } => "irm_oracle",
                SeparatorKind::IbmOracle { .. } => "ibm_oracle",
                SeparatorKind::IdentitySplit => "identity_split",
                SeparatorKind::External(_) => "external",
            }
            .to_string()
        })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            SeparatorKind::IrmOracle { stft } | SeparatorKind::IbmOracle { stft } => {
                stft.validate()?;
                if stft.cola_constant().is_none() {
                    return Err(crate::Error::InvalidStft(format!(
                        "oracle STFT {stft:?} does not satisfy COLA"
                    )));
                }
                Ok(())
            }
            SeparatorKind::IdentitySplit => Ok(()),
            SeparatorKind::External(ext) => ext.validate(),
        }
    }

    /// Separates `mixture`. Oracles read `sources`; the others ignore it
    /// except to decide the channel count.
    pub fn separate(&self, mixture: &Waveform, sources: &[Waveform]) -> Result<SeparationResult> {
        let estimates = match &self.kind {
            SeparatorKind::IrmOracle { stft } => separate_irm(mixture, sources, stft)?,
            SeparatorKind::IbmOracle { stft } => separate_ibm(mixture, sources, stft)?,
            SeparatorKind::IdentitySplit => identity_split(mixture, sources.len().max(2))?,
            SeparatorKind::External(ext) => separate_external(ext, mixture)?,
        };
        let mut result = SeparationResult::new(estimates);
        result.separator_id = self.id();
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_json_shapes() {
        let irm: SeparatorDescriptor = serde_json::from_str(r#"{"kind":"irm_oracle"}"#).unwrap();
        assert_eq!(irm, SeparatorDescriptor::irm());
        assert_eq!(irm.id(), "irm_oracle");

        let ext: SeparatorDescriptor = serde_json::from_str(
            r#"{"kind":"external","id":"convtasnet","command_template":"run --input {input} --outdir {outdir}","timeout_s":5}"#,
        )
        .unwrap();
        assert_eq!(ext.id(), "convtasnet");
        ext.validate().unwrap();
        match ext.kind {
            SeparatorKind::External(e) => assert_eq!(e.num_speakers, 2),
            _ => panic!("wrong kind"),
        }

        let bad: SeparatorDescriptor =
            serde_json::from_str(r#"{"kind":"external","command_template":"run"}"#).unwrap();
        assert!(bad.validate().is_err());
    }
}
