from klog.hashing import FNV_OFFSET_BASIS, chain, fnv1a_64, fold, hash_label, hash_pair


def test_fnv1a_known_vectors():
    assert fnv1a_64(b"") == FNV_OFFSET_BASIS
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_hash_label_is_stable():
    assert hash_label("atm\x1fc") == hash_label("atm\x1fc")
    assert hash_label("atm\x1fc") == fnv1a_64("atm\x1fc".encode("utf-8"))
    assert hash_label("atm\x1fc") != hash_label("atm\x1fn")


def test_chain_depends_on_order():
    assert chain([1, 2, 3]) == chain([1, 2, 3])
    assert chain([1, 2, 3]) != chain([3, 2, 1])
    assert chain([]) == FNV_OFFSET_BASIS


def test_chain_hashes_strings_first():
    assert chain(["b"]) == chain([hash_label("b")])


def test_hash_pair_matches_chain():
    assert hash_pair(2, 17) == chain((2, 17))


def test_fold_keeps_low_bits():
    value = chain(["x", 1])
    assert 0 <= fold(value, 16) < 2 ** 16
    assert fold(value, 16) == value & 0xFFFF
    assert fold(value, 64) == value
