"""Fixed-latency interconnect between the cache manager and the far memory."""

from dataclasses import dataclass

from .core import ConfigError


TO_FAR, FROM_FAR = "to_far", "from_far"


@dataclass
class LinkConfig:
    round_trip: int = 0  # Ticks

    def validate(self):
        if self.round_trip < 0:
            raise ConfigError("link round_trip must be >= 0")
        return self


class Link:
    """Latency pipe in front of one far channel, half the round trip each way.

    It exposes the same ``submit``/``on_complete``/``on_space`` surface as a
    :class:`~dramcache.device.Device`. Admission is credit based: the near side
    may have at most ``read_buffer``/``write_buffer`` ops outstanding that the far
    controller has not yet dequeued, so backpressure is decided locally and the
    credit return travels back over the link. With a zero round trip every
    forward happens synchronously, which makes the link transparent.
    """

    def __init__(self, engine, device, config: LinkConfig, on_complete=None, on_space=None):
        self.engine = engine
        self.device = device
        self.config = config
        self.half = config.round_trip // 2
        self.other_half = config.round_trip - self.half
        self.on_complete = on_complete
        self.on_space = on_space
        self.credits = {False: device.config.read_buffer, True: device.config.write_buffer}
        self.forwarded = {TO_FAR: 0, FROM_FAR: 0}
        device.on_complete = self._from_far_complete
        device.on_space = self._from_far_space

    @property
    def name(self):
        return self.device.name

    @property
    def config_device(self):
        return self.device.config

    def can_accept(self, is_write):
        return self.credits[is_write] > 0

    def submit(self, op):
        if self.credits[op.is_write] <= 0:
            return False
        self.credits[op.is_write] -= 1
        self.forward(op, TO_FAR)
        return True

    def forward(self, item, direction, is_write=None):
        """Deliver ``item`` to the other side after half the round trip."""
        self.forwarded[direction] += 1
        if direction == TO_FAR:
            delay, target = self.half, self._deliver_to_far
        else:
            delay, target = self.other_half, self._deliver_from_far
        if delay == 0:
            target(item, is_write)
        else:
            self.engine.schedule(target, delay, item, is_write)

    def _deliver_to_far(self, op, _):
        if not self.device.submit(op):
            raise RuntimeError(f"{self.name}: far queue overflow despite credit")

    def _deliver_from_far(self, item, is_write):
        if is_write is None:
            if self.on_complete is not None:
                self.on_complete(item)
        else:
            self.credits[is_write] += 1
            if self.on_space is not None:
                self.on_space(self, is_write)

    def _from_far_complete(self, op):
        self.forward(op, FROM_FAR)

    def _from_far_space(self, device, is_write):
        self.forward(None, FROM_FAR, is_write)

    @property
    def idle(self):
        return self.device.idle
