from lib.catalog.systems import CATALOG, SystemDef, SectionHint, list_systems, get_system, build, center, general_form
