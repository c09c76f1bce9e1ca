"""Boolean circuits: wire algebra, thunk compilation, clear evaluation."""

import pytest

from wysx.lang import (
    Bool, Env, FfiInt, FfiPair, PrinSet, Sealed, slice_env,
)
from wysx.sexp import parse
from wysx.shares import ShareMint
from wysx.circuit import (
    AND, CONST, NOT, XOR,
    Builder, MissingInput, NotCircuitable, add_wires, bind_inputs,
    compile_sec_thunk, decode_output, decode_word, dump_circuit, encode_word,
    eq_wires, eval_circuit, gt_wires, mux_wires, sub_wires,
)

A = PrinSet.of("a")
B = PrinSet.of("b")
AB = PrinSet.of("a", "b")


def test_word_codec_round_trip():
    for w in (2, 4, 8):
        lo, hi = -(1 << (w - 1)), 1 << (w - 1)
        for n in range(lo, hi):
            assert decode_word(encode_word(n, w), w) == n


def wires_for(b, n, width):
    word = encode_word(n, width)
    return tuple(b.const((word >> i) & 1) for i in range(width))


def word_of(b, wires, wv=None):
    if wv is None:
        wv = {}
    for g in b.gates:
        if g.op == CONST:
            wv[g.out] = g.bit
        elif g.op == XOR:
            wv[g.out] = wv[g.a] ^ wv[g.b]
        elif g.op == AND:
            wv[g.out] = wv[g.a] & wv[g.b]
        elif g.op == NOT:
            wv[g.out] = 1 - wv[g.a]
    out = 0
    for i, w in enumerate(wires):
        out |= wv[w] << i
    return out


def test_adder_on_all_4bit_pairs():
    width = 4
    for x in range(-8, 8):
        for y in range(-8, 8):
            b = Builder()
            zs = add_wires(b, wires_for(b, x, width), wires_for(b, y, width))
            got = decode_word(word_of(b, zs), width)
            want = decode_word((x + y) & 0xF, width)
            assert got == want, (x, y)


def test_subtractor_on_all_4bit_pairs():
    width = 4
    for x in range(-8, 8):
        for y in range(-8, 8):
            b = Builder()
            zs = sub_wires(b, wires_for(b, x, width), wires_for(b, y, width))
            assert decode_word(word_of(b, zs), width) == decode_word((x - y) & 0xF, width)


def test_signed_comparison_on_all_4bit_pairs():
    width = 4
    for x in range(-8, 8):
        for y in range(-8, 8):
            b = Builder()
            g = gt_wires(b, wires_for(b, x, width), wires_for(b, y, width))
            e = eq_wires(b, wires_for(b, x, width), wires_for(b, y, width))
            wv = {}
            word_of(b, (), wv)
            assert wv[g] == int(x > y), (x, y)
            assert wv[e] == int(x == y), (x, y)


def test_mux_picks_by_condition():
    width = 4
    for c in (0, 1):
        b = Builder()
        cw = b.const(c)
        zs = mux_wires(b, cw, wires_for(b, 3, width), wires_for(b, -5, width))
        assert decode_word(word_of(b, zs), width) == (3 if c else -5)


def test_builder_folds_constants():
    b = Builder()
    x = b.input_wire()
    assert b.xor(x, b.const(0)) == x
    assert b.and_(x, b.const(1)) == x
    assert b.and_(x, b.const(0)) == b.const(0)
    assert b.xor(x, x) == b.const(0)
    assert b.and_(x, x) == x


# thunk compilation

def median_like_env():
    return Env({"xa": Sealed(A, FfiInt(5)), "xb": Sealed(B, FfiInt(9))})


def compile_and_run(src, env, width=8, expect_parties=AB):
    circ = compile_sec_thunk(env, parse(src), expect_parties, width, ShareMint(0))
    envs = {p: slice_env(p, env) for p in expect_parties}
    bits = bind_inputs(circ, envs)
    wv = eval_circuit(circ, bits)
    return circ, {p: decode_output(circ.decode, p, wv) for p in expect_parties}


def test_compile_comparison_thunk():
    circ, out = compile_and_run("(ffi gt (reveal xa) (reveal xb))", median_like_env())
    assert out["a"] == Bool(False) and out["b"] == Bool(False)
    assert circ.and_count > 0


def test_compile_arith_and_mux():
    src = "(if (ffi gt (reveal xa) (reveal xb)) (ffi sub (reveal xa) (reveal xb)) (ffi add (reveal xa) (reveal xb)))"
    circ, out = compile_and_run(src, median_like_env())
    assert out["a"] == FfiInt(14)


def test_compile_pair_result():
    src = "(ffi pair (ffi add (reveal xa) 1) (ffi eq (reveal xa) (reveal xb)))"
    circ, out = compile_and_run(src, median_like_env())
    assert out["b"] == FfiPair(FfiInt(6), Bool(False))


def test_public_subterms_stay_constant():
    # nothing secret flows into 2+3, so it must not cost any gates
    circ, out = compile_and_run("(ffi add 2 3)", Env())
    assert out["a"] == FfiInt(5)
    assert circ.and_count == 0


def test_public_loop_spine_unrolls():
    src = """((fix f n (if (ffi eq n 0) (reveal xa) (f (ffi sub n 1)))) 3)"""
    circ, out = compile_and_run(src, median_like_env())
    assert out["a"] == FfiInt(5)


def test_sealed_result_is_addressed():
    circ, out = compile_and_run("(seal (prins a) (reveal xb))", median_like_env())
    assert out["a"] == Sealed(A, FfiInt(9))
    assert out["b"].ps == A
    assert type(out["b"].v).__name__ == "Opaque"


def test_compile_rejects_unsupported_ops():
    with pytest.raises(NotCircuitable):
        compile_sec_thunk(median_like_env(),
                          parse("(ffi mul (reveal xa) (reveal xb))"),
                          AB, 8, ShareMint(0))


def test_compile_rejects_nested_blocks():
    with pytest.raises(NotCircuitable):
        compile_sec_thunk(median_like_env(),
                          parse("(as_par (prins a) (lam _ 1))"),
                          AB, 8, ShareMint(0))
    with pytest.raises(NotCircuitable):
        compile_sec_thunk(median_like_env(),
                          parse("(as_sec (prins a b) (lam _ 1))"),
                          AB, 8, ShareMint(0))


def test_compile_rejects_secret_branch_with_minting():
    # a handle cannot be created under a secret condition
    src = "(if (ffi gt (reveal xa) (reveal xb)) (ffi mk_sh 1) (ffi mk_sh 2))"
    with pytest.raises(NotCircuitable):
        compile_sec_thunk(median_like_env(), parse(src), AB, 8, ShareMint(0))


def test_bind_inputs_requires_concrete_data():
    env = median_like_env()
    circ = compile_sec_thunk(env, parse("(ffi gt (reveal xa) (reveal xb))"),
                             AB, 8, ShareMint(0))
    # hand a's role to a party that only holds placeholders
    wrong = {"a": slice_env("b", env), "b": slice_env("b", env)}
    with pytest.raises(MissingInput):
        bind_inputs(circ, wrong)


def test_secret_condition_costs_and_gates():
    base = "(ffi add (reveal xa) (reveal xb))"
    cond = "(if (ffi gt (reveal xa) (reveal xb)) (reveal xa) (reveal xb))"
    ca, _ = compile_and_run(base, median_like_env())
    cb, _ = compile_and_run(cond, median_like_env())
    assert cb.and_count > ca.and_count


def test_mint_inside_circuit_matches_runtime_mint():
    # compiling (mk_sh v) draws the same mask words the direct machine draws
    from wysx.st import Runtime, run
    src = "(as_sec (prins a b) (lam _ (ffi mk_sh (reveal xa))))"
    env = median_like_env()
    st = run(parse(src), env=env, rt=Runtime(seed=4, width=8))
    assert st.status == "done"
    circ = compile_sec_thunk(env, parse("(ffi mk_sh (reveal xa))"),
                             AB, 8, ShareMint(4))
    envs = {p: slice_env(p, env) for p in AB}
    wv = eval_circuit(circ, bind_inputs(circ, envs))
    for p in AB:
        got = decode_output(circ.decode, p, wv)
        assert got.word_of(p) == st.value.word_of(p), p


def test_dump_circuit_is_readable():
    circ, _ = compile_and_run("(ffi gt (reveal xa) (reveal xb))", median_like_env())
    text = dump_circuit(circ)
    assert "circuit parties=a,b" in text
    assert "ands=" in text
    assert "INPUT a" in text and "INPUT b" in text
    assert "OUT " in text
