"""Regenerate the shipped constellation TLE fixtures under src/leoroute/data/."""
from leoroute.constellations import SHELLS, builtin_tle_path, walker_records, write_tle_file

if __name__ == "__main__":
    for key, shell in SHELLS.items():
        path = builtin_tle_path(key)
        recs = walker_records(shell)
        write_tle_file(recs, path)
        print(f"{path}: {len(recs)} satellites")
