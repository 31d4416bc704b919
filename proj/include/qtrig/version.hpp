#pragma once

#define QTRIG_VERSION_MAJOR 0
#define QTRIG_VERSION_MINOR 1
#define QTRIG_VERSION_PATCH 0
#define QTRIG_VERSION_STRING "0.1.0"
