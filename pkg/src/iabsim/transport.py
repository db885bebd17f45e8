"""RLC-like hop-by-hop FIFO buffers and per-link transmission with partial-packet carry-over."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Hashable, Iterator, Optional

from .model import Packet

DU_RX = "du_rx"
MT_TX = "mt_tx"

DROPPED_OVERFLOW = "dropped_overflow"
DROPPED_NOROUTE = "dropped_noroute"


class RlcBuffer:
    """Tail-drop FIFO with a byte capacity.

    Packets are kept in per-flow FIFOs (flow = originating UE in a DU-RX buffer,
    next hop in an MT-TX buffer) that share the capacity; order is preserved
    within each flow, which is the granularity at which a link drains the buffer.
    """

    def __init__(self, role: str, owner: int, capacity_bytes: int):
        self.role = role
        self.owner = owner
        self.capacity_bytes = capacity_bytes
        self.flows: dict[Hashable, deque[Packet]] = {}
        self.occupancy_bits = 0
        self.drops = 0
        self.count = 0

    @property
    def occupancy_bytes(self) -> float:
        return self.occupancy_bits / 8.0

    def __len__(self) -> int:
        return self.count

    def __iter__(self) -> Iterator[Packet]:
        for key in sorted(self.flows, key=_flow_sort_key):
            yield from self.flows[key]

    def head(self, flow: Hashable = None) -> Optional[Packet]:
        q = self.flows.get(flow)
        return q[0] if q else None

    def ready(self, flow: Hashable, slot: int) -> bool:
        q = self.flows.get(flow)
        return bool(q) and q[0].ready_slot <= slot

    def push(self, packet: Packet, flow: Hashable = None) -> bool:
        size = packet.packet_size_bits
        if self.occupancy_bits + size > self.capacity_bytes * 8:
            self.drops += 1
            packet.status = DROPPED_OVERFLOW
            return False
        self.flows.setdefault(flow, deque()).append(packet)
        self.occupancy_bits += size
        self.count += 1
        return True

    def pop(self, flow: Hashable = None) -> Packet:
        q = self.flows[flow]
        pkt = q.popleft()
        if not q:
            del self.flows[flow]
        self.occupancy_bits -= pkt.packet_size_bits
        self.count -= 1
        return pkt


def _flow_sort_key(key):
    return (key is not None, key)


def enqueue(buffer: RlcBuffer, packet: Packet, flow: Hashable = None) -> bool:
    """Accept the packet iff it fits; otherwise tail-drop it. Returns acceptance."""
    return buffer.push(packet, flow)


@dataclass
class LinkTxState:
    link_id: str
    head_packet_id: Optional[int] = None
    residual_bits: float = 0.0


def transfer(
    tx_state: LinkTxState,
    tx_buffer: RlcBuffer,
    flow: Hashable,
    rx_sink: Callable[[Packet], None],
    rate_bps: float,
    slot_duration_s: float,
    slot: int,
) -> tuple[list[Packet], float]:
    """Serve one flow of ``tx_buffer`` for one slot at ``rate_bps``.

    Fully transmitted packets are popped and handed to ``rx_sink`` in FIFO order.
    A head packet that does not fit keeps its residual for the next active slot;
    budget left over after the queue empties (or hits a packet that arrived this
    slot) is discarded. Returns the moved packets and the bits spent.
    """
    budget = rate_bps * slot_duration_s
    moved: list[Packet] = []
    spent = 0.0
    while budget > 0 and tx_buffer.ready(flow, slot):
        head = tx_buffer.head(flow)
        if tx_state.head_packet_id != head.packet_id:
            tx_state.head_packet_id = head.packet_id
            tx_state.residual_bits = float(head.packet_size_bits)
        if budget >= tx_state.residual_bits:
            budget -= tx_state.residual_bits
            spent += tx_state.residual_bits
            tx_state.head_packet_id = None
            tx_state.residual_bits = 0.0
            pkt = tx_buffer.pop(flow)
            moved.append(pkt)
            rx_sink(pkt)
        else:
            tx_state.residual_bits -= budget
            spent += budget
            budget = 0.0
    return moved, spent
