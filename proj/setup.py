import os
import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.extension import Extension


class CMakeExtension(Extension):
    def __init__(self, name: str):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    """Builds the _cmsa extension with CMake and copies it into the package."""

    def build_extension(self, ext: CMakeExtension) -> None:
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        out_path = Path(self.get_ext_fullpath(ext.name)).resolve()
        out_path.parent.mkdir(parents=True, exist_ok=True)

        cfg_args = [
            "cmake",
            "-S", str(source_dir),
            "-B", str(build_dir),
            "-DCMAKE_BUILD_TYPE=Release",
            "-DCMSA_BUILD_TESTS=OFF",
            "-DCMSA_BUILD_PYTHON=ON",
            f"-DPython3_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(cfg_args, check=True)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_cmsa",
             "-j", str(os.cpu_count() or 2)],
            check=True,
        )

        built = sorted(build_dir.rglob("_cmsa*.so"))
        if not built:
            raise RuntimeError(f"CMake did not produce _cmsa in {build_dir}")
        shutil.copy2(built[0], out_path)


setup(
    ext_modules=[CMakeExtension("cmsa._cmsa")],
    cmdclass={"build_ext": CMakeBuild},
)
