"""WAN layer: node discovery, per-node information-service daemons, and
reliable messaging over an unreliable datagram substrate."""

from .envelope import (  # noqa: F401
    ENVELOPE_OVERHEAD, Envelope, EnvelopeError, Kind, decode_envelope,
    encode_envelope, node_hash,
)
from .link import LinkModel, SimNet  # noqa: F401
from .transport import (  # noqa: F401
    DeliveryFailed, Endpoint, NodeAddress, Registry, Unroutable,
)
from .isd import EpochClient, InfoServiceDaemon, request_epochs  # noqa: F401
from .discovery import Activator, NodeDown, Prober, probe_node  # noqa: F401
