from xswap.transcript import Transcript


def test_same_inputs_same_challenge():
    t1 = Transcript(b"test/proto")
    t2 = Transcript(b"test/proto")
    for t in (t1, t2):
        t.append(b"a", b"hello")
        t.append(b"b", b"world")
    assert t1.challenge_int(b"e", 252) == t2.challenge_int(b"e", 252)


def test_challenge_in_range():
    t = Transcript(b"test/proto")
    t.append(b"x", b"y")
    for bits in (1, 8, 13, 252, 256):
        c = t.challenge_int(b"e", bits)
        assert 0 <= c < (1 << bits)


def test_label_and_data_split_is_unambiguous():
    t1 = Transcript(b"p")
    t1.append(b"ab", b"c")
    t2 = Transcript(b"p")
    t2.append(b"a", b"bc")
    assert t1.challenge_int(b"e", 128) != t2.challenge_int(b"e", 128)


def test_order_matters():
    t1 = Transcript(b"p")
    t1.append(b"x", b"1")
    t1.append(b"x", b"2")
    t2 = Transcript(b"p")
    t2.append(b"x", b"2")
    t2.append(b"x", b"1")
    assert t1.challenge_int(b"e", 128) != t2.challenge_int(b"e", 128)


def test_sequential_challenges_differ():
    t = Transcript(b"p")
    t.append(b"x", b"1")
    assert t.challenge_int(b"e", 128) != t.challenge_int(b"e", 128)


def test_protocol_label_separates_domains():
    t1 = Transcript(b"proto-one")
    t2 = Transcript(b"proto-two")
    for t in (t1, t2):
        t.append(b"x", b"1")
    assert t1.challenge_int(b"e", 128) != t2.challenge_int(b"e", 128)
