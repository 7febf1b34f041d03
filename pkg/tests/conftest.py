import wave

import numpy as np
import pytest

from persa.tf_pipeline import PipelineConfig, Waveform, mel_filterbank, write_wav


@pytest.fixture(scope="session")
def pipeline():
    return PipelineConfig()


@pytest.fixture(scope="session")
def fb(pipeline):
    return mel_filterbank(pipeline)


@pytest.fixture
def write_pcm(tmp_path):
    """Write raw int16 frames with arbitrary channel count / rate."""

    def _write(name, frames, rate=16000, channels=1, width=2):
        path = tmp_path / name
        with wave.open(str(path), "wb") as fh:
            fh.setnchannels(channels)
            fh.setsampwidth(width)
            fh.setframerate(rate)
            fh.writeframes(np.asarray(frames).tobytes())
        return path

    return _write


@pytest.fixture
def tone_wav(tmp_path):
    def _write(name, seconds=1.0, freq=440.0, amp=0.5, rate=16000):
        t = np.arange(int(seconds * rate)) / rate
        path = tmp_path / name
        write_wav(path, Waveform(amp * np.sin(2 * np.pi * freq * t), rate))
        return path

    return _write


def random_tf(rng, shape=(61, 64), lo_db=-100.0, hi_db=0.0):
    """Random magnitudes, log-uniform between lo_db and hi_db (20*log10)."""
    return 10.0 ** (rng.uniform(lo_db, hi_db, size=shape) / 20.0)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def _record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
