"""Link-level simulator for multicast massive-MIMO downlink with spatial user subgrouping."""

__version__ = "0.1.0"
