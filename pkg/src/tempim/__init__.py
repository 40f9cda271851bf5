"""Supervised influence maximization on temporal multi-relational graphs."""

__version__ = "0.1.0"

from .graph import (ALL_RELS, DEFAULT_RELS, IngestSummary, ParseError, RelationKind,
                    TemporalEdge, TemporalMultiGraph, derive_strong_by_quantile, ingest_edges)
from .ipp import (IPP, FilterStats, LabelSet, active_members, brute_force_ipps,
                  enumerate_two_hop_motifs, filter_ipps, mine_ipps, validate_ipp)
from .serialize import IStrRecord, SerializationConfig, Serializer, decode, degree_count, encode, sim
from .coldstart import PTTIndex, RetrievalParams, Trie, build_ptt, locate, neighbor_retrieval
from .diffusion import (SeedSet, SpreadReport, cooldown_filter, hop_limited_spread, ic_spread,
                        network_scale, one_neighbor_ratio, select_seeds, spread_report)
from .message_agg import (Feed, GRUWeights, MemoryStore, Message, aggregate, process_feed_batched,
                          process_feed_loop, update_memory)
