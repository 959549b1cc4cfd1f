# A script to delete cached profiles and run directories older than a given age
import os, sys
sys.path.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))

import argparse
from cmctorus.cache import cache_dir
from cmctorus.utils import age_hours, remove_directory

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description='A script to remove cached profile tables.')
    parser.add_argument('--hours', type=float, required=True, help='The age of cache entries that should be deleted in hours')
    parser.add_argument('--cache_dir', type=str, help='Cache directory, defaults to $CMCTORUS_CACHE_DIR or ~/.cache/cmctorus')

    args = parser.parse_args()

    directory = cache_dir(args.cache_dir)
    for entry in os.listdir(directory):
        path = os.path.join(directory, entry)
        if age_hours(path) >= args.hours:
            if os.path.isdir(path):
                remove_directory(path)
            else:
                os.remove(path)
            print(f"Removed {entry}")
