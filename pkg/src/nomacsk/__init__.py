"""Power allocation for two-user NOMA over colour shift keying visible light links.

Submodules: ``spectral`` (LED spectra, power matrices), ``channel`` (LoS gains),
``link`` (SINR, Monte Carlo BER, throughput), ``policies`` (GRPA, NGDPA, TDMA),
``environment``/``sac``/``training``/``checkpoint`` (soft actor-critic agent),
``illumination`` (flux, CCT, CRI) and ``harness``/``cli`` (experiments).
"""

from .channel import ChannelPair, GeometryConfig, lambert_order, los_gain, sample_channel_pair
from .errors import ConfigurationError, DomainError, FormatError, PreconditionError
from .link import LinkConfig, LinkReport, capacity, evaluate_link, jain_index
from .policies import AllocationDecision, apply_policy, grpa, ngdpa, tdma_eval

__version__ = "0.1.0"
