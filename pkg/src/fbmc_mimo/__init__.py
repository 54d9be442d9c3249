"""Link-level simulator for cosine modulated multitone (CMT) filter bank
multicarrier in a massive MIMO uplink, with a CP-OFDM baseline."""

__version__ = "0.1.0"
