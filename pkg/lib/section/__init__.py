from lib.section.poincare import SectionSpec, SectionPoint, SectionCrossings, section_crossings, default_section
from lib.section.return_map import ReturnMap, TransitionMatrix, build_return_map, transition_matrix
