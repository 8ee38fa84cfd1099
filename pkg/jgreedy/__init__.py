default_app_config = "jgreedy.apps.JgreedyConfig"
