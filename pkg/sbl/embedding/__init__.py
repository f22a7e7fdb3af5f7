"""
Desk-scale embedding pipeline of H_{r,t} graphs into dense hosts.
"""

from sbl.embedding.assignment import *
from sbl.embedding.blowup import *
from sbl.embedding.checks import *
from sbl.embedding.dense import *
from sbl.embedding.partition import *
from sbl.embedding.pipeline import *
