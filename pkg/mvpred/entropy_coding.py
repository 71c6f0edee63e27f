"""
Residual coding costs

Histograms, Shannon entropy, canonical Huffman tables with deterministic
tie-breaking, stream encode/decode, signaling costs and the bitstream dump
format (8-byte little-endian bit count, then bits packed MSB-first).
"""

import heapq
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Hashable, Iterable, List, Sequence, Tuple, Union

from .data_models import Signal
from .errors import CoverageError, DecodeError, FormatError, StatisticError


@dataclass
class SymbolHistogram:
    counts: Dict[Hashable, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def probabilities(self) -> Dict[Hashable, float]:
        total = self.total
        return {symbol: count / total for symbol, count in self.counts.items() if count > 0}


@dataclass
class HuffmanTable:
    """symbol -> (code length in bits, canonical codeword as an integer)"""
    entries: Dict[Hashable, Tuple[int, int]] = field(default_factory=dict)

    def length(self, symbol: Hashable) -> int:
        return self.entries[symbol][0]

    def codeword(self, symbol: Hashable) -> str:
        length, code = self.entries[symbol]
        return format(code, f'0{length}b')

    def kraft_sum(self) -> float:
        return sum(2.0 ** -length for length, _ in self.entries.values())


def histogram(values: Iterable[Hashable]) -> SymbolHistogram:
    counts = Counter(values)
    if not counts:
        raise StatisticError("Histogram of an empty sequence")
    return SymbolHistogram(counts=dict(sorted(counts.items())))


def entropy(hist: SymbolHistogram) -> float:
    """Shannon entropy in bits per symbol"""
    return float(-sum(p * math.log2(p) for p in hist.probabilities().values()))


def build_huffman(hist: SymbolHistogram) -> HuffmanTable:
    """Canonical Huffman code for a histogram.

    Merges always take the lighter subtree first, breaking weight ties by the
    smaller minimum symbol. A one-symbol alphabet gets the single codeword "0".
    """
    symbols = sorted(symbol for symbol, count in hist.counts.items() if count > 0)
    if not symbols:
        raise StatisticError("Cannot build a Huffman code for an empty histogram")

    lengths = {symbol: 0 for symbol in symbols}
    if len(symbols) == 1:
        lengths[symbols[0]] = 1
    else:
        heap = [(hist.counts[symbol], symbol, [symbol]) for symbol in symbols]
        heapq.heapify(heap)
        while len(heap) > 1:
            w1, min1, members1 = heapq.heappop(heap)
            w2, min2, members2 = heapq.heappop(heap)
            for symbol in members1 + members2:
                lengths[symbol] += 1
            heapq.heappush(heap, (w1 + w2, min(min1, min2), members1 + members2))

    return canonical_table(lengths)


def canonical_table(lengths: Dict[Hashable, int]) -> HuffmanTable:
    """Assign canonical codewords in (length, symbol) order"""
    ordered = sorted(lengths.items(), key=lambda item: (item[1], item[0]))
    entries = {}
    code = 0
    previous_length = ordered[0][1]
    for symbol, length in ordered:
        code <<= length - previous_length
        entries[symbol] = (length, code)
        code += 1
        previous_length = length
    return HuffmanTable(entries=entries)


def code_cost(hist: SymbolHistogram, table: HuffmanTable) -> int:
    total = 0
    for symbol, count in hist.counts.items():
        if count == 0:
            continue
        if symbol not in table.entries:
            raise CoverageError(f"Symbol {symbol!r} has no codeword")
        total += count * table.entries[symbol][0]
    return total


def encode_stream(symbols: Iterable[Hashable], table: HuffmanTable) -> str:
    """Concatenated codewords as a '0'/'1' string"""
    codewords = {symbol: table.codeword(symbol) for symbol in table.entries}
    parts = []
    for symbol in symbols:
        if symbol not in codewords:
            raise CoverageError(f"Symbol {symbol!r} has no codeword")
        parts.append(codewords[symbol])
    return ''.join(parts)


def decode_stream(bits: str, table: HuffmanTable) -> List[Hashable]:
    decoder = {(length, code): symbol for symbol, (length, code) in table.entries.items()}
    max_length = max((length for length, _ in table.entries.values()), default=0)

    symbols = []
    code = 0
    length = 0
    start = 0
    for offset, bit in enumerate(bits):
        if bit not in '01':
            raise DecodeError(f"Invalid bit character {bit!r}", offset)
        code = (code << 1) | (bit == '1')
        length += 1
        symbol_key = (length, code)
        if symbol_key in decoder:
            symbols.append(decoder[symbol_key])
            code = length = 0
            start = offset + 1
        elif length >= max_length:
            raise DecodeError("No codeword matches", start)
    if length:
        raise DecodeError("Bitstring ends inside a codeword", start)
    return symbols


def signaling_cost(signals: Sequence[Signal], mode: str = 'flat') -> int:
    """Bits to tell the decoder which neighbor was selected.

    flat: one median/non-median flag per symbol plus one side bit for each
    non-median symbol. huffman: Huffman code over the three-symbol histogram.
    """
    if not signals:
        return 0
    if mode == 'flat':
        return len(signals) + sum(1 for s in signals if Signal(s) is not Signal.MEDIAN)
    if mode == 'huffman':
        hist = histogram(Signal(s).value for s in signals)
        return code_cost(hist, build_huffman(hist))
    raise ValueError(f"Unknown signaling mode: {mode}")


def pack_bits(bits: str) -> bytes:
    """Dump format: bit count as 8-byte little-endian, then MSB-first packed bits"""
    padded = bits + '0' * (-len(bits) % 8)
    payload = bytes(int(padded[i:i + 8], 2) for i in range(0, len(padded), 8))
    return struct.pack('<Q', len(bits)) + payload


def unpack_bits(data: bytes) -> str:
    if len(data) < 8:
        raise FormatError("Bitstream dump shorter than its 8-byte header", offset=len(data))
    (bit_count,) = struct.unpack('<Q', data[:8])
    payload = data[8:]
    if len(payload) * 8 < bit_count:
        raise FormatError(f"Bitstream dump holds {len(payload) * 8} bits, header says {bit_count}",
                          offset=len(data))
    return ''.join(format(byte, '08b') for byte in payload)[:bit_count]


def write_bitstream(path: Union[str, Path], bits: str) -> int:
    data = pack_bits(bits)
    with open(path, 'wb') as file:
        file.write(data)
    return len(data)


def read_bitstream(path: Union[str, Path]) -> str:
    with open(path, 'rb') as file:
        return unpack_bits(file.read())
