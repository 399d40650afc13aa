//! System parameters shared by the transmitter, channel and receiver.

use thiserror::Error;

/// CRC length used when at most this many users are active.
pub const SHORT_CRC_USER_LIMIT: usize = 300;

/// Regularizer placed on the symbol prior in the per-symbol MMSE filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SymbolPrior {
    /// `2 I`.
    #[default]
    Printed,
    /// `0.5 I`, the inverse symbol energy of a `{±1±j}` alphabet.
    InverseEnergy,
}

impl SymbolPrior {
    pub fn weight(self) -> f64 {
        match self {
            SymbolPrior::Printed => 2.0,
            SymbolPrior::InverseEnergy => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("code length {0} is not a power of two >= 2")]
    CodeLength(usize),
    #[error("channel uses {n} != pilot length {n_p} + {t} symbols x spread length {l}")]
    ChannelUses { n: usize, n_p: usize, t: usize, l: usize },
    #[error("index bits {index_bits} must be in 1..=24 and below message bits {message_bits}")]
    IndexBits { index_bits: usize, message_bits: usize },
    #[error("info+crc length {info} exceeds code length {code}")]
    InfoLength { info: usize, code: usize },
    #[error("unsupported CRC length {0} (expected 12 or 16)")]
    CrcLength(usize),
    #[error("{0} must be positive")]
    Zero(&'static str),
    #[error("design parameter {0} outside (0, 1)")]
    DesignZ(f64),
}

/// Every dimension of one scheme instance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SystemConfig {
    /// Message length `B`.
    pub message_bits: usize,
    /// Bits selecting the pilot / spreading column, `B_f`.
    pub index_bits: usize,
    /// Complex channel uses `n`.
    pub channel_uses: usize,
    /// Pilot length `n_p`.
    pub pilot_len: usize,
    /// Chips per coded symbol `L`.
    pub spread_len: usize,
    /// Polar code length `n_c`.
    pub code_len: usize,
    pub crc_len: usize,
    /// Receive antennas `M`.
    pub antennas: usize,
    /// Active users `K`.
    pub users: usize,
    /// SCL list size `n_L`.
    pub list_size: usize,
    #[cfg_attr(feature = "serde", serde(with = "seed_format"))]
    pub seed: u64,
    /// Channel re-estimation passes per SIC iteration; zero disables them.
    pub nopice_rounds: usize,
    pub max_sic_iters: usize,
    pub symbol_prior: SymbolPrior,
    /// Bhattacharyya parameter used to rank polar bit channels.
    pub design_z: f64,
    /// Keep duplicate messages when drawing a trial instead of resampling.
    pub allow_duplicate_messages: bool,
}

impl SystemConfig {
    /// Operating point of the large-scale experiments for `users` active devices.
    pub fn full(users: usize) -> Self {
        SystemConfig {
            message_bits: 100,
            index_bits: 16,
            channel_uses: 3200,
            pilot_len: 896,
            spread_len: 9,
            code_len: 512,
            crc_len: crc_len_for_users(users),
            antennas: 50,
            users,
            list_size: 64,
            seed: 0x00FA_5A7A,
            nopice_rounds: 1,
            max_sic_iters: 40,
            symbol_prior: SymbolPrior::Printed,
            design_z: 0.32,
            allow_duplicate_messages: false,
        }
    }

    /// Small configuration used in CI: `J = 2^10`, 8 users, 8 antennas.
    pub fn smoke() -> Self {
        SystemConfig {
            message_bits: 50,
            index_bits: 10,
            channel_uses: 64 + 64 * 5,
            pilot_len: 64,
            spread_len: 5,
            code_len: 128,
            crc_len: 12,
            antennas: 8,
            users: 8,
            list_size: 32,
            seed: 0x5EED,
            nopice_rounds: 1,
            max_sic_iters: 20,
            symbol_prior: SymbolPrior::Printed,
            design_z: 0.32,
            allow_duplicate_messages: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.code_len < 2 || !self.code_len.is_power_of_two() {
            return Err(ConfigError::CodeLength(self.code_len));
        }
        if self.index_bits == 0 || self.index_bits > 24 || self.index_bits >= self.message_bits {
            return Err(ConfigError::IndexBits {
                index_bits: self.index_bits,
                message_bits: self.message_bits,
            });
        }
        if self.crc_len != 12 && self.crc_len != 16 {
            return Err(ConfigError::CrcLength(self.crc_len));
        }
        for (name, v) in [
            ("pilot_len", self.pilot_len),
            ("spread_len", self.spread_len),
            ("antennas", self.antennas),
            ("users", self.users),
            ("list_size", self.list_size),
            ("max_sic_iters", self.max_sic_iters),
        ] {
            if v == 0 {
                return Err(ConfigError::Zero(name));
            }
        }
        let t = self.symbols();
        if self.channel_uses != self.pilot_len + t * self.spread_len {
            return Err(ConfigError::ChannelUses {
                n: self.channel_uses,
                n_p: self.pilot_len,
                t,
                l: self.spread_len,
            });
        }
        if self.info_len() > self.code_len {
            return Err(ConfigError::InfoLength { info: self.info_len(), code: self.code_len });
        }
        if !(self.design_z > 0.0 && self.design_z < 1.0) {
            return Err(ConfigError::DesignZ(self.design_z));
        }
        Ok(())
    }

    /// `B_s`, bits carried by the polar codeword.
    pub fn payload_bits(&self) -> usize {
        self.message_bits - self.index_bits
    }

    /// `B_c = B_s + B_crc`.
    pub fn info_len(&self) -> usize {
        self.payload_bits() + self.crc_len
    }

    pub fn frozen_len(&self) -> usize {
        self.code_len - self.info_len()
    }

    /// QPSK symbols per codeword, `T = n_c / 2`.
    pub fn symbols(&self) -> usize {
        self.code_len / 2
    }

    /// Number of pilot / spreading columns, `J = 2^B_f`.
    pub fn num_sequences(&self) -> usize {
        1 << self.index_bits
    }
}

/// Seeds above `i64::MAX` are written as `"0x…"` strings so that formats
/// with signed 64-bit integers (TOML) can hold every seed.
#[cfg(feature = "serde")]
mod seed_format {
    use alloc::format;
    use alloc::string::String;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&format!("{seed:#x}")),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Text(t) => {
                let parsed = match t.strip_prefix("0x") {
                    Some(hex) => u64::from_str_radix(hex, 16),
                    None => t.parse(),
                };
                parsed.map_err(|_| de::Error::custom(format!("invalid seed `{t}`")))
            }
        }
    }
}

/// 12 CRC bits up to 300 users, 16 beyond.
pub fn crc_len_for_users(users: usize) -> usize {
    if users <= SHORT_CRC_USER_LIMIT {
        12
    } else {
        16
    }
}
