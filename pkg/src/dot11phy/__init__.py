"""802.11a/g/n/ac 20 MHz baseband PHY library.

Transmit side builds Legacy, HT 2x2, and VHT SU/MU/NDP frames; receive side
runs detection, synchronization, channel estimation, and soft-decision
decoding; the channel and harness modules support reproducible simulation
studies end to end.
"""

from .params import (
    Modulation,
    PhyFormat,
    mcs_params,
    symbols_for_payload,
)
from .framer import MuUser, PhyConfig, TxFrame, assemble_packet
from .receiver import ReceivedPacket, receive
from .channel import MimoChannelTaps, apply_cfo, apply_mimo_fir, awgn, ideal_taps, tgac_model_b_taps
from .mumimo import (
    CsiReport,
    Station,
    SteeringMatrix,
    compute_zf_weights,
    measure_ndp_channel,
    run_mu_transmission,
    run_sounding_session,
)
from .harness import SweepSpec, decode_file, pdr_sweep, read_iq, rows_to_csv, write_iq

__version__ = "0.1.0"

__all__ = [
    "Modulation",
    "PhyFormat",
    "mcs_params",
    "symbols_for_payload",
    "MuUser",
    "PhyConfig",
    "TxFrame",
    "assemble_packet",
    "ReceivedPacket",
    "receive",
    "MimoChannelTaps",
    "apply_cfo",
    "apply_mimo_fir",
    "awgn",
    "ideal_taps",
    "tgac_model_b_taps",
    "CsiReport",
    "Station",
    "SteeringMatrix",
    "compute_zf_weights",
    "measure_ndp_channel",
    "run_mu_transmission",
    "run_sounding_session",
    "SweepSpec",
    "decode_file",
    "pdr_sweep",
    "read_iq",
    "rows_to_csv",
    "write_iq",
    "__version__",
]
