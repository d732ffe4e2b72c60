#pragma once

#define VERIFREE_LAB_VERSION "0.1.0"
