#!/usr/bin/env python3
"""
Verify that the spikekit setup is correct.
Run this before training or running the verification suites.
"""

import os
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

REQUIRED_FILES = [
    "spikekit/__init__.py",
    "spikekit/cli.py",
    "scripts/run_spikekit.py",
    "configs/asn_shifted.json",
    "configs/ablation_shifted.json",
    "configs/bench.json",
    "docs/SPKF_FORMAT.md",
]

SCRIPTS_TO_CHECK = [
    "scripts/run_spikekit.py",
    "generation/generate_shifted_task.py",
    "analysis/summarize_runs.py",
]


def check_python_version():
    """Check Python version is 3.8+"""
    if sys.version_info < (3, 8):
        print("❌ Python 3.8+ required. Detected:", sys.version)
        return False
    print(f"✅ Python {sys.version_info.major}.{sys.version_info.minor} detected")
    return True


def check_dependencies():
    """numpy is required; pandas and matplotlib only for analysis/"""
    ok = True
    try:
        import numpy
        print(f"✅ numpy {numpy.__version__} installed")
    except ImportError:
        print("❌ numpy NOT installed")
        print("   Run: pip install -r requirements.txt")
        ok = False
    for optional in ("pandas", "matplotlib"):
        try:
            __import__(optional)
            print(f"✅ {optional} installed")
        except ImportError:
            print(f"⚠️  {optional} not installed (only needed for analysis/summarize_runs.py)")
    return ok


def check_environment():
    """SPIKEKIT_* variables must parse if they are set"""
    sys.path.insert(0, str(ROOT))
    try:
        from spikekit.errors import ConfigError
        from spikekit.settings import Settings
    except ImportError as e:
        print(f"❌ Cannot import spikekit: {e}")
        return False
    try:
        settings = Settings.from_env()
    except ConfigError as e:
        print(f"❌ {e}")
        return False
    print(f"✅ Worker cap (SPIKEKIT_THREADS): {settings.threads}")
    print(f"✅ Output directory: {settings.output_dir}")
    print(f"✅ Energy constants: E_AC={settings.e_ac_pj} pJ, E_MAC={settings.e_mac_pj} pJ")
    return True


def check_files(root=ROOT):
    """Check if required files exist"""
    all_exist = True
    for filepath in REQUIRED_FILES:
        if os.path.exists(root / filepath):
            print(f"✅ Found: {filepath}")
        else:
            print(f"❌ Missing: {filepath}")
            all_exist = False
    return all_exist


def check_syntax(root=ROOT, scripts=SCRIPTS_TO_CHECK):
    """Check if scripts have valid syntax"""
    all_valid = True
    for script_path in scripts:
        try:
            with open(root / script_path, "r", encoding="utf-8") as f:
                compile(f.read(), script_path, "exec")
            print(f"✅ {script_path} syntax is valid")
        except SyntaxError as e:
            print(f"❌ Syntax error in {script_path}: {e}")
            print(f"   Line {e.lineno}: {e.text}")
            all_valid = False
        except UnicodeDecodeError as e:
            print(f"❌ Unicode error in {script_path}: {e}")
            all_valid = False
        except FileNotFoundError:
            print(f"❌ File not found: {script_path}")
            all_valid = False
    return all_valid


def main():
    print("=" * 70)
    print("🔍 VERIFYING SPIKEKIT SETUP")
    print("=" * 70)
    print()

    checks = [
        ("Python Version", check_python_version),
        ("Required Files", check_files),
        ("Syntax Check", check_syntax),
        ("Dependencies", check_dependencies),
        ("Environment", check_environment),
    ]

    results = []
    for name, check_func in checks:
        print(f"\n📋 Checking: {name}")
        print("-" * 70)
        results.append(check_func())
        print()

    print("=" * 70)
    if all(results):
        print("✅ ALL CHECKS PASSED! Setup complete.")
        print("=" * 70)
        print("\nNext step:")
        print("  python scripts/run_spikekit.py gradcheck")
        return 0
    else:
        print("❌ SOME CHECKS FAILED. Please fix the issues above.")
        print("=" * 70)
        print("\nFor help, see: docs/SETUP.md")
        return 1


if __name__ == "__main__":
    sys.exit(main())
