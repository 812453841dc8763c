//! Radio abstraction: log-distance path loss, SNR-based MCS selection and
//! airtime of single-user and multiuser PPDUs.
//!
//! All durations are integer microseconds. The OFDM symbol is kept in
//! nanoseconds so that 13.6 us symbols are exact; the PPDU total is rounded
//! up to the next microsecond.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Micros;
use crate::mu::RuSize;

#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("A-MPDU length {n} outside 1..={max}")]
    AmpduLength { n: usize, max: usize },
    #[error("MCS {0} is not in the rate table (link infeasible)")]
    InfeasibleMcs(usize),
    #[error("spatial stream count {0} outside 1..=8")]
    Streams(u8),
    #[error("rate at MCS {mcs} with {streams} stream(s) on {tones} tones carries no data bits")]
    ZeroRate { mcs: usize, streams: u8, tones: u16 },
}

/// Log-distance model with an additional linear attenuation term:
/// `PL(d) = reference + 10 * exponent * log10(d) + linear * d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossParams {
    pub reference_loss_db: f64,
    pub exponent: f64,
    pub linear_db_per_m: f64,
}

impl Default for PathLossParams {
    /// TMB 5 GHz indoor profile.
    fn default() -> Self {
        Self {
            reference_loss_db: 54.12,
            exponent: 2.06067,
            linear_db_per_m: 5.25 * 0.1467,
        }
    }
}

/// One row of the rate table. The coded rate is `rate_num / rate_den` data
/// bits per tone per spatial stream per OFDM symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsEntry {
    pub min_snr_db: f64,
    pub rate_num: u32,
    pub rate_den: u32,
}

impl McsEntry {
    const fn new(min_snr_db: f64, rate_num: u32, rate_den: u32) -> Self {
        Self {
            min_snr_db,
            rate_num,
            rate_den,
        }
    }
}

/// HE MCS 0-11 coded rates. The SNR thresholds are the minimum-sensitivity
/// levels for a 20 MHz HE PPDU referenced to a -94 dBm noise floor, shifted
/// down by a 4 dB implementation margin.
pub fn default_mcs_table() -> Vec<McsEntry> {
    vec![
        McsEntry::new(8.0, 1, 2),    // BPSK 1/2
        McsEntry::new(11.0, 1, 1),   // QPSK 1/2
        McsEntry::new(13.0, 3, 2),   // QPSK 3/4
        McsEntry::new(16.0, 2, 1),   // 16-QAM 1/2
        McsEntry::new(20.0, 3, 1),   // 16-QAM 3/4
        McsEntry::new(24.0, 4, 1),   // 64-QAM 2/3
        McsEntry::new(25.0, 9, 2),   // 64-QAM 3/4
        McsEntry::new(26.0, 5, 1),   // 64-QAM 5/6
        McsEntry::new(31.0, 6, 1),   // 256-QAM 3/4
        McsEntry::new(33.0, 20, 3),  // 256-QAM 5/6
        McsEntry::new(36.0, 15, 2),  // 1024-QAM 3/4
        McsEntry::new(38.0, 25, 3),  // 1024-QAM 5/6
    ]
}

/// Index into the configured rate table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mcs(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyConfig {
    pub tx_power_dbm: f64,
    pub channel_width_mhz: u32,
    pub noise_floor_dbm: f64,
    pub path_loss: PathLossParams,
    pub mcs_table: Vec<McsEntry>,
    /// OFDM symbol including guard interval, in nanoseconds.
    pub symbol_ns: u64,
    pub preamble_us: Micros,
    pub sifs_us: Micros,
    pub rts_us: Micros,
    pub cts_us: Micros,
    /// Trigger frame (basic trigger or MU-RTS variant share this value).
    pub trigger_us: Micros,
    /// Block ACK; also used for the multiuser block ACK.
    pub ack_us: Micros,
    pub beacon_us: Micros,
    /// Announced-mode solicitation frame (PS-Poll-like).
    pub solicitation_us: Micros,
    pub mpdu_framing_bits: u64,
    pub max_ampdu: usize,
    pub max_ppdu_us: Micros,
    pub su_streams: u8,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 16.0,
            channel_width_mhz: 20,
            noise_floor_dbm: -94.0,
            path_loss: PathLossParams::default(),
            mcs_table: default_mcs_table(),
            symbol_ns: 13_600,
            preamble_us: 48,
            sifs_us: 16,
            rts_us: 52,
            cts_us: 44,
            trigger_us: 68,
            ack_us: 68,
            beacon_us: 300,
            solicitation_us: 44,
            mpdu_framing_bits: 32,
            max_ampdu: 64,
            max_ppdu_us: 5_484,
            su_streams: 2,
        }
    }
}

/// Inputs of a single PPDU airtime computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirtimeQuery {
    pub payload_bits: u64,
    pub mcs: Mcs,
    pub spatial_streams: u8,
    pub ru: RuSize,
}

/// Channel occupancy of one exchange, split by what the medium carried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExchangeTiming {
    /// Control frames plus the SIFS gaps between them.
    pub control_us: Micros,
    pub data_us: Micros,
}

impl ExchangeTiming {
    pub fn total(&self) -> Micros {
        self.control_us + self.data_us
    }
}

impl PhyConfig {
    pub fn path_loss_db(&self, distance_m: f64) -> Result<f64, PhyError> {
        if !(distance_m > 0.0) {
            return Err(PhyError::NonPositiveDistance(distance_m));
        }
        let p = &self.path_loss;
        Ok(p.reference_loss_db
            + 10.0 * p.exponent * distance_m.log10()
            + p.linear_db_per_m * distance_m)
    }

    pub fn rx_power_dbm(&self, distance_m: f64) -> Result<f64, PhyError> {
        Ok(self.tx_power_dbm - self.path_loss_db(distance_m)?)
    }

    pub fn snr_db(&self, distance_m: f64) -> Result<f64, PhyError> {
        Ok(self.rx_power_dbm(distance_m)? - self.noise_floor_dbm)
    }

    /// Highest MCS whose threshold is met, or `None` if the link is infeasible.
    pub fn select_mcs(&self, snr_db: f64) -> Option<Mcs> {
        self.mcs_table
            .iter()
            .rposition(|e| e.min_snr_db <= snr_db)
            .map(Mcs)
    }

    /// Data bits per OFDM symbol for `streams` streams on an RU.
    pub fn bits_per_symbol(&self, mcs: Mcs, streams: u8, ru: RuSize) -> Result<u64, PhyError> {
        let entry = self
            .mcs_table
            .get(mcs.0)
            .ok_or(PhyError::InfeasibleMcs(mcs.0))?;
        if !(1..=8).contains(&streams) {
            return Err(PhyError::Streams(streams));
        }
        let n = ru.data_tones() as u64 * entry.rate_num as u64 * streams as u64
            / entry.rate_den as u64;
        if n == 0 {
            return Err(PhyError::ZeroRate {
                mcs: mcs.0,
                streams,
                tones: ru.tones(),
            });
        }
        Ok(n)
    }

    /// Airtime of a PPDU carrying `n_mpdus` MPDUs of `q.payload_bits` each.
    pub fn ppdu_airtime(&self, q: &AirtimeQuery, n_mpdus: usize) -> Result<Micros, PhyError> {
        if n_mpdus == 0 || n_mpdus > self.max_ampdu {
            return Err(PhyError::AmpduLength {
                n: n_mpdus,
                max: self.max_ampdu,
            });
        }
        let ndbps = self.bits_per_symbol(q.mcs, q.spatial_streams, q.ru)?;
        let bits = n_mpdus as u64 * (q.payload_bits + self.mpdu_framing_bits);
        let symbols = bits.div_ceil(ndbps);
        Ok(self.preamble_us + (symbols * self.symbol_ns).div_ceil(1000))
    }

    /// Largest A-MPDU (capped at `max_ampdu` and `want`) whose PPDU fits in
    /// `max_ppdu_us`. Returns 0 only when `want` is 0.
    pub fn max_fitting_mpdus(&self, q: &AirtimeQuery, want: usize) -> Result<usize, PhyError> {
        let mut n = want.min(self.max_ampdu);
        if n == 0 {
            return Ok(0);
        }
        let ndbps = self.bits_per_symbol(q.mcs, q.spatial_streams, q.ru)?;
        let budget_ns = self.max_ppdu_us.saturating_sub(self.preamble_us) * 1000;
        let max_symbols = budget_ns / self.symbol_ns;
        let per_mpdu = q.payload_bits + self.mpdu_framing_bits;
        let fit = (max_symbols * ndbps / per_mpdu) as usize;
        n = n.min(fit.max(1));
        Ok(n)
    }

    pub fn exchange_timing(&self, data_us: Micros, protection: bool, mu: bool) -> ExchangeTiming {
        let mut control = 0;
        if protection {
            control += self.rts_us + self.sifs_us + self.cts_us + self.sifs_us;
        }
        if mu {
            control += self.trigger_us + self.sifs_us;
        }
        control += self.sifs_us + self.ack_us;
        ExchangeTiming {
            control_us: control,
            data_us,
        }
    }

    /// Channel occupancy of one successful exchange carrying a data PPDU of
    /// `data_us`.
    pub fn exchange_airtime(&self, data_us: Micros, protection: bool, mu: bool) -> Micros {
        self.exchange_timing(data_us, protection, mu).total()
    }

    /// Data tones available at the configured channel width.
    pub fn full_width_ru(&self) -> Option<RuSize> {
        RuSize::full_width(self.channel_width_mhz)
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if RuSize::full_width(self.channel_width_mhz).is_none() {
            errs.push(format!(
                "phy.channel_width_mhz: {} is not one of 20, 40, 80, 160",
                self.channel_width_mhz
            ));
        }
        if self.mcs_table.is_empty() {
            errs.push("phy.mcs_table: must not be empty".into());
        }
        for (i, w) in self.mcs_table.windows(2).enumerate() {
            let (a, b) = (&w[0], &w[1]);
            if !(a.min_snr_db < b.min_snr_db) {
                errs.push(format!(
                    "phy.mcs_table[{}]: SNR thresholds must strictly increase",
                    i + 1
                ));
            }
            if a.rate_num as u64 * b.rate_den as u64 >= b.rate_num as u64 * a.rate_den as u64 {
                errs.push(format!(
                    "phy.mcs_table[{}]: rates must strictly increase",
                    i + 1
                ));
            }
        }
        if self.mcs_table.iter().any(|e| e.rate_den == 0 || e.rate_num == 0) {
            errs.push("phy.mcs_table: rate_num and rate_den must be positive".into());
        }
        if self.symbol_ns == 0 {
            errs.push("phy.symbol_ns: must be positive".into());
        }
        if self.max_ampdu == 0 {
            errs.push("phy.max_ampdu: must be at least 1".into());
        }
        if !(1..=8).contains(&self.su_streams) {
            errs.push("phy.su_streams: must be in 1..=8".into());
        }
        if self.max_ppdu_us <= self.preamble_us {
            errs.push("phy.max_ppdu_us: must exceed preamble_us".into());
        }
        errs
    }
}
