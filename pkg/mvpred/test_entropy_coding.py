"""Tests for histograms, entropy, canonical Huffman codes and signaling costs"""

import pytest

from .data_models import Signal
from .entropy_coding import (
    SymbolHistogram, build_huffman, canonical_table, code_cost, decode_stream, encode_stream, entropy, histogram,
    pack_bits, read_bitstream, signaling_cost, unpack_bits, write_bitstream,
)
from .errors import CoverageError, DecodeError, FormatError, StatisticError


def test_histogram_counts():
    assert histogram([0, 0, 0]).counts == {0: 3}
    assert histogram([-1, 0, 0, 1]).counts == {-1: 1, 0: 2, 1: 1}
    with pytest.raises(StatisticError):
        histogram([])


def test_histogram_conserves_total(rng):
    values = rng.integers(-20, 21, size=10_000).tolist()
    assert histogram(values).total == 10_000


def test_entropy_values():
    assert entropy(histogram([5] * 8)) == 0.0
    assert entropy(histogram([0, 1, 2, 3])) == pytest.approx(2.0)
    assert entropy(histogram([0, 0, 1, 2])) == pytest.approx(1.5)


def test_huffman_lengths():
    table = build_huffman(histogram([0, 1, 2, 3]))
    assert {s: table.length(s) for s in range(4)} == {0: 2, 1: 2, 2: 2, 3: 2}

    table = build_huffman(histogram([0, 0, 1, 2]))
    assert {s: table.length(s) for s in range(3)} == {0: 1, 1: 2, 2: 2}


def test_single_symbol_alphabet():
    table = build_huffman(histogram(['A']))
    assert table.length('A') == 1
    assert table.codeword('A') == '0'


def test_canonical_codewords():
    table = canonical_table({'a': 1, 'b': 2, 'c': 3, 'd': 3})
    assert [table.codeword(s) for s in 'abcd'] == ['0', '10', '110', '111']


def test_huffman_is_deterministic_and_complete(rng):
    values = rng.geometric(0.3, size=5000).tolist()
    first = build_huffman(histogram(values))
    second = build_huffman(histogram(values))
    assert first.entries == second.entries
    assert first.kraft_sum() == pytest.approx(1.0)


def test_huffman_within_one_bit_of_entropy(rng):
    for _ in range(1000):
        alphabet = int(rng.integers(2, 41))
        counts = rng.integers(1, 1000, size=alphabet) if rng.random() < 0.5 else rng.geometric(0.2, size=alphabet)
        hist = SymbolHistogram(counts={symbol: int(count) for symbol, count in enumerate(counts)})
        table = build_huffman(hist)
        assert table.kraft_sum() == 1.0
        mean_length = code_cost(hist, table) / hist.total
        assert entropy(hist) <= mean_length + 1e-12
        assert mean_length < entropy(hist) + 1


def test_code_cost():
    hist = histogram([0, 0, 0])
    assert code_cost(hist, build_huffman(hist)) == 3
    hist = histogram([0, 1, 2, 3] * 25)
    assert code_cost(hist, build_huffman(hist)) == 200


def test_code_cost_missing_symbol():
    table = build_huffman(histogram([0, 1]))
    with pytest.raises(CoverageError):
        code_cost(histogram([0, 5]), table)


def test_stream_coding(rng):
    values = rng.integers(-10, 11, size=100_000).tolist()
    table = build_huffman(histogram(values))
    bits = encode_stream(values, table)
    assert len(bits) == code_cost(histogram(values), table)
    assert decode_stream(bits, table) == values
    assert encode_stream([], table) == ''


@pytest.mark.slow
def test_many_short_streams_decode(rng):
    for _ in range(100_000):
        values = rng.integers(-8, 9, size=int(rng.integers(1, 40))).tolist()
        table = build_huffman(histogram(values))
        assert decode_stream(encode_stream(values, table), table) == values


def test_decode_rejects_trailing_bits():
    table = canonical_table({'a': 1, 'b': 2, 'c': 2})
    with pytest.raises(DecodeError) as excinfo:
        decode_stream('0101', table)
    assert excinfo.value.bit_offset == 3


def test_flat_signaling():
    assert signaling_cost([Signal.MEDIAN] * 10, 'flat') == 10
    assert signaling_cost([Signal.LOWER] * 10, 'flat') == 20
    assert signaling_cost([Signal.MEDIAN, Signal.HIGHER], 'flat') == 3
    assert signaling_cost([], 'flat') == 0


def test_huffman_signaling():
    assert signaling_cost([Signal.MEDIAN] * 10, 'huffman') == 10
    mixed = [Signal.MEDIAN] * 2 + [Signal.LOWER, Signal.HIGHER]
    assert signaling_cost(mixed, 'huffman') == 2 * 1 + 2 * 2


def test_huffman_signaling_never_worse_than_flat(rng):
    choices = [Signal.MEDIAN, Signal.LOWER, Signal.HIGHER]
    for _ in range(20):
        signals = [choices[i] for i in rng.choice(3, size=50, p=[0.6, 0.2, 0.2])]
        assert signaling_cost(signals, 'huffman') <= signaling_cost(signals, 'flat')


def test_unknown_signaling_mode():
    with pytest.raises(ValueError):
        signaling_cost([Signal.MEDIAN], 'arith')


def test_bit_packing():
    data = pack_bits('1011')
    assert data[:8] == (4).to_bytes(8, 'little')
    assert data[8:] == bytes([0b10110000])
    assert unpack_bits(data) == '1011'


def test_bitstream_file(tmp_path):
    path = tmp_path / 'res.bin'
    assert write_bitstream(path, '110' * 7) == 8 + 3
    assert read_bitstream(path) == '110' * 7


def test_short_bitstream_dump():
    with pytest.raises(FormatError):
        unpack_bits(b'\x01\x02')
    with pytest.raises(FormatError):
        unpack_bits((20).to_bytes(8, 'little') + b'\x00')
