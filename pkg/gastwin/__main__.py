# -*- coding: utf-8 -*-
from gastwin.cli import main

main()
