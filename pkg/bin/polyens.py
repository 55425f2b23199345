#! /usr/bin/env python3

#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

import sys

from polyens.entrypoints import polyens

if __name__ == "__main__":
    sys.exit(polyens.main())
