"""Exception types raised by the engine."""

from __future__ import annotations


class HotellingError(ValueError):
    """Base class for invalid inputs and unsupported requests."""


class OutOfSegment(HotellingError):
    pass


class TripleOverlap(HotellingError):
    pass


class NotApplicable(HotellingError):
    pass


class NoEquilibrium(HotellingError):
    pass


class ParamOutOfRange(HotellingError):
    pass


class CutOnServer(HotellingError):
    pass


class TooManyServers(HotellingError):
    pass
