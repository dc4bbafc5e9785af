# report package